n = int(input())
print(bin(n).count('1'))
