"""Independent reference computations for the golden values frozen in the
C++ tests. Exact rational arithmetic, no shared code with the library.

    python3 tests/oracles/reference.py
"""

from fractions import Fraction
from itertools import product

# --- three dice -------------------------------------------------------------
triples = list(product(range(1, 7), repeat=3))
valid = [t for t in triples if sum(t) == 7]
dice_evidence = Fraction(len(valid), len(triples))
dice_h = Fraction(sum(1 for t in valid if t[0] == 5), len(valid))
die1_posterior = {v: Fraction(sum(1 for t in valid if t[0] == v), len(valid)) for v in range(1, 7)}

# --- monkey: brute force over every string ------------------------------------
def monkey_count(alphabet, length, pattern):
    pat = tuple(pattern)
    m = len(pat)
    hits = 0
    for s in product(range(alphabet), repeat=length):
        if any(s[i : i + m] == pat for i in range(length - m + 1)):
            hits += 1
    return hits


# --- expression grammar -----------------------------------------------------
FULL = {"Var": Fraction(3, 10), "Const": Fraction(3, 10), "Add": Fraction(2, 10), "Mul": Fraction(2, 10)}
TERMINAL = {"Var": Fraction(1, 2), "Const": Fraction(1, 2)}


def programs(depth, cap):
    """Yields (probability, function) for every program rooted at `depth`."""
    prior = TERMINAL if depth >= cap else FULL
    for prod, p in prior.items():
        if prod == "Var":
            yield p, (lambda x: x)
        elif prod == "Const":
            for c in range(10):
                yield p / 10, (lambda x, c=c: c)
        else:
            subs = list(programs(depth + 1, cap))
            for pl, fl in subs:
                for pr, fr in subs:
                    if prod == "Add":
                        yield p * pl * pr, (lambda x, fl=fl, fr=fr: fl(x) + fr(x))
                    else:
                        yield p * pl * pr, (lambda x, fl=fl, fr=fr: fl(x) * fr(x))


def expr_oracle(cap):
    n = 0
    total = Fraction(0)
    evidence = Fraction(0)
    numerator = Fraction(0)
    for p, f in programs(1, cap):
        n += 1
        total += p
        if f(3) == 9 and f(4) == 16:
            evidence += p
            if f(5) == 25:
                numerator += p
    return n, total, evidence, numerator / evidence


if __name__ == "__main__":
    print("dice evidence", dice_evidence, float(dice_evidence))
    print("dice E(h|e)", dice_h, float(dice_h))
    print("dice die1 posterior", {k: str(v) for k, v in die1_posterior.items()})
    print("monkey a=2 L=12 'aba' count", monkey_count(2, 12, (0, 1, 0)), "of", 2 ** 12)
    n, total, ev, post = expr_oracle(3)
    print("expr cap 3 paths", n, "mass", total, "evidence", ev, float(ev), "E(h|e)", post)
    n, total, ev, post = expr_oracle(2)
    print("expr cap 2 paths", n, "mass", total, "evidence", ev, float(ev), "E(h|e)", post)
