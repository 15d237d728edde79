def unused(x):
    return x + 1

if __name__ == "__main__":
    pass
