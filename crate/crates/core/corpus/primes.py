def sieve(n):
    marks = [True] * (n + 1)
    marks[0] = False
    marks[1] = False
    i = 2
    while i * i <= n:
        if marks[i]:
            j = i * i
            while j <= n:
                marks[j] = False
                j += i
        i += 1
    return marks

def count_primes(n):
    marks = sieve(n)
    c = 0
    for k in range(n + 1):
        if marks[k]:
            c += 1
    return c

if __name__ == "__main__":
    print(count_primes(100), count_primes(1000))
