def gcd(a, b):
    while b != 0:
        t = b
        b = a % b
        a = t
    return a

def lcm(a, b):
    return a // gcd(a, b) * b

if __name__ == "__main__":
    print(gcd(1071, 462), lcm(4, 6))
    acc = 1
    for k in range(1, 21):
        acc = lcm(acc, k)
    print(acc)
