import math

def area(r):
    return 3.14159 * r * r

def wobble(x):
    return math.sin(x) * 2
