xs = list(map(int, input().split()))
best = xs[0]
for x in xs:
    if x > best:
        best = x
print(best)
