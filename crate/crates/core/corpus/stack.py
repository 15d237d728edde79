class Stack:
    def __init__(self):
        self.items = []
        self.size = 0

    def push(self, x):
        self.items = self.items + [x]
        self.size += 1

    def peek(self):
        return self.items[self.size - 1]

def balanced(text):
    s = Stack()
    for i in range(len(text)):
        c = text[i]
        if c == "(":
            s.push(c)
        elif c == ")":
            if s.size == 0:
                return False
            s.size -= 1
    return s.size == 0

if __name__ == "__main__":
    print(balanced("(()())"), balanced("(()"), balanced(")("))
