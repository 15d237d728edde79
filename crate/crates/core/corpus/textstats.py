separator = " "

def count_char(text, c):
    n = 0
    for i in range(len(text)):
        if text[i] == c:
            n += 1
    return n

def words(text):
    return count_char(text, separator) + 1

def report(text):
    print("chars", len(text))
    print("words", words(text))
    return str(words(text)) + "/" + str(len(text))

if __name__ == "__main__":
    r = report("the quick brown fox jumps over the lazy dog")
    print(r)
