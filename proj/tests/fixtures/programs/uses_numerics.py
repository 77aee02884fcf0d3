import sys

from numerics import mean, variance

values = [float(tok) for tok in sys.stdin.read().split()]
print(f"{mean(values):.3f} {variance(values):.3f}")
