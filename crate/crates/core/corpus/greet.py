def greet(greeting):
    name = input()
    print(greeting + ",", name)
    return len(name)

if __name__ == "__main__":
    n = greet("Hello")
    m = greet("Goodbye")
    print("letters:", n + m)
