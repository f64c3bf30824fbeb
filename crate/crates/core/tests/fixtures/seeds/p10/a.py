n = int(input())
for i in range(n):
    for j in range(n):
        if i == j and not i < 1:
            print(i, j)
