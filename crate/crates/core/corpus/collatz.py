def steps(n):
    s = 0
    while n != 1:
        if n % 2 == 0:
            n = n // 2
        else:
            n = 3 * n + 1
        s += 1
    return s

def longest(limit):
    best = 1
    best_steps = 0
    for n in range(1, limit):
        s = steps(n)
        if s > best_steps:
            best = n
            best_steps = s
    return [best, best_steps]

if __name__ == "__main__":
    r = longest(30)
    print(r[0], r[1])
