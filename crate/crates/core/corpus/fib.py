def fib(x):
    if x in (1, 2):
        return 1
    return fib(x - 1) + fib(x - 2)

if __name__ == "__main__":
    print(fib(10))
