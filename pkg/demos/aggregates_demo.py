"""Rounds of the aggregate tasks stay flat as the network grows."""
from cpnet.aggregate import distinct_count, median, mode, random_values, rank
from cpnet.topology import gen_cp

for n in (64, 256, 1024, 4096):
    net = gen_cp(n)
    vals = random_values(n, 0)
    small = random_values(n, 0, hi=5)
    cells = [f"{fn.__name__} {fn(net, v).rounds:2}"
             for fn, v in ((rank, vals), (median, vals), (mode, small), (distinct_count, vals))]
    print(f"n={n:5}  " + "  ".join(cells))
