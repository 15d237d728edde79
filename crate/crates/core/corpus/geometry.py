import shapes

def total_area(n):
    t = 0.0
    for i in range(1, n + 1):
        t += shapes.area(i)
    return t

if __name__ == "__main__":
    print(total_area(4))
    print(shapes.wobble(0))
