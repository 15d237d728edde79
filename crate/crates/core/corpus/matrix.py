def identity(n):
    m = []
    for i in range(n):
        row = []
        for j in range(n):
            if i == j:
                row = row + [1]
            else:
                row = row + [0]
        m = m + [row]
    return m

def multiply(a, b):
    n = len(a)
    out = []
    for i in range(n):
        row = []
        for j in range(n):
            s = 0
            for k in range(n):
                s += a[i][k] * b[k][j]
            row = row + [s]
        out = out + [row]
    return out

def power(m, e):
    r = identity(len(m))
    for i in range(e):
        r = multiply(r, m)
    return r

if __name__ == "__main__":
    q = [[1, 1], [1, 0]]
    print(power(q, 30)[0][1])
