a = int(input())
b = int(input())
print(a ** 2 % 7 + b)
