from fractions import Fraction as F

from slopeforge.pwmap import PwaMap


def random_constant_slope(rng, m, slope):
    """Continuous zigzag on [0,1] with |slope| exactly `slope` everywhere."""
    for _ in range(50):
        lengths = [F(rng.randint(1, 8)) for _ in range(m + 1)]
        total = sum(lengths)
        lengths = [l / total for l in lengths]
        up = rng.random() < 0.5
        y = F(rng.randint(0, 8), 8)
        ys = [y]
        ok = True
        for l in lengths:
            y = y + slope * l if up else y - slope * l
            up = not up
            if not (0 <= y <= 1):
                ok = False
                break
            ys.append(y)
        if not ok:
            continue
        xs = [F(0)]
        for l in lengths:
            xs.append(xs[-1] + l)
        return PwaMap.from_pairs(list(zip(xs, ys)))
    # canonical fallback: full zigzag from 0
    lengths = [F(1, m + 1)] * (m + 1)
    ys = [F(0)]
    up = True
    for l in lengths:
        ys.append(ys[-1] + slope * l if up else ys[-1] - slope * l)
        up = not up
    xs = [F(k, m + 1) for k in range(m + 2)]
    return PwaMap.from_pairs(list(zip(xs, ys)))
