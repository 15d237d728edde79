import math

calls = 0

def fibs(x):
    global calls
    calls += 1
    s = 0.0
    for i in range(200):
        s += math.sin(i)
    if x in (1, 2):
        return 1
    return fibs(x - 1) + fibs(x - 2)

if __name__ == "__main__":
    print(fibs(12))
