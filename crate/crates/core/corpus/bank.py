def fee(amount):
    if amount > 100:
        return 1
    return 0

class Account:
    def __init__(self, owner, balance):
        self.owner = owner
        self.balance = balance
        self.history = []

    def deposit(self, amount):
        self.balance += amount
        self.history = self.history + [amount]
        return self.balance

    def withdraw(self, amount):
        cost = amount + fee(amount)
        if cost > self.balance:
            return False
        self.balance -= cost
        self.history = self.history + [0 - cost]
        return True

if __name__ == "__main__":
    a = Account("ada", 50)
    a.deposit(200)
    ok = a.withdraw(120)
    bad = a.withdraw(1000)
    print(a.owner, a.balance, ok, bad, len(a.history))
