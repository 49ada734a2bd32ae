"""Independent oracle for the 13-row sample: descriptive statistics and a
scalar LSTM cell step. Values printed here are frozen into the C++ tests."""
import math
import numpy as np

ROWS = """2006/5/25,3.748966684,4.283868673,3.739663824,4.279217243
2006/5/26,4.307126229,4.348057576,4.103397917,4.179679871
2006/5/30,4.183400226,4.184330423,3.986183781,4.093164444
2006/5/31,4.125722657,4.219679208,4.125722657,4.180608273
2006/6/1,4.179678186,4.474571934,4.176887151,4.419686317
2006/6/2,4.511782082,4.530387351,4.352706872,4.371312141
2006/6/5,4.376895226,4.581553703,4.372243796,4.572250843
2006/6/6,4.649463041,4.709930299,4.446665399,4.493178368
2006/6/7,4.495967881,4.502479703,4.348986117,4.428058624
2006/6/8,4.428061429,4.439224243,4.232705752,4.439224243
2006/6/9,4.539691402,4.539691402,4.435501776,4.444804192
2006/6/12,4.46527062,4.488526882,4.307125554,4.367592812
2006/6/13,4.297822402,4.404803063,4.214098888,4.232704163"""

cols = list(zip(*[[float(v) for v in r.split(",")[1:]] for r in ROWS.splitlines()]))
for name, col in zip(["open", "high", "low", "close"], cols):
    a = np.array(col)
    q = np.quantile(a, [0.25, 0.5, 0.75])  # linear interpolation
    print(name, repr(a.mean()), repr(a.std(ddof=1)), repr(a.min()),
          repr(q[0]), repr(q[1]), repr(q[2]), repr(a.max()))

sig = lambda x: 1 / (1 + math.exp(-x))
i = sig(0.5); g = math.tanh(0.5); c = i * g; h = i * math.tanh(c)
print("cell", repr(i), repr(g), repr(c), repr(h))
print("tanh1", repr(math.tanh(1.0)))

# Tournament k=2 over fitness [0,-1,-2]: enumerate all 2-subsets.
from itertools import combinations
fit = [0, -1, -2]
wins = [0, 0, 0]
subs = list(combinations(range(3), 2))
for s in subs:
    wins[max(s, key=lambda j: (fit[j], -j))] += 1
print("tournament", [w / len(subs) for w in wins])
