"""Reference SplitMix64 / Fisher-Yates implementation.

Run once to produce shuffle_golden.json; the C++ tests compare against the
frozen file, never against this script.
"""

import json
import sys

MASK = (1 << 64) - 1


class SplitMix64:
    def __init__(self, seed):
        self.state = seed & MASK

    def next(self):
        self.state = (self.state + 0x9E3779B97F4A7C15) & MASK
        z = self.state
        z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & MASK
        z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & MASK
        return z ^ (z >> 31)

    def below(self, bound):
        threshold = ((1 << 64) - bound) % bound
        while True:
            r = self.next()
            if r >= threshold:
                return r % bound


def fisher_yates(items, rng):
    items = list(items)
    for i in range(len(items), 1, -1):
        j = rng.below(i)
        items[i - 1], items[j] = items[j], items[i - 1]
    return items


def fnv1a64(s):
    h = 0xCBF29CE484222325
    for b in s.encode("utf-8"):
        h ^= b
        h = (h * 0x100000001B3) & MASK
    return h


def derive_seed(base, key):
    return SplitMix64(base ^ fnv1a64(key)).next()


def main():
    seeds = [0, 1, 7, 42, 123456789, MASK]
    sizes = [1, 2, 4, 10, 52, 100]
    out = {"raw": [], "shuffles": [], "derived": []}
    for s in seeds:
        rng = SplitMix64(s)
        out["raw"].append({"seed": str(s), "values": [str(rng.next()) for _ in range(5)]})
        for n in sizes:
            out["shuffles"].append(
                {"seed": str(s), "n": n, "perm": fisher_yates(range(n), SplitMix64(s))})
    for s in seeds:
        for key in ["", "q1:d1", "reverse", "random", "été"]:
            out["derived"].append({"seed": str(s), "key": key, "value": str(derive_seed(s, key))})
    json.dump(out, sys.stdout, indent=1, ensure_ascii=False)
    sys.stdout.write("\n")


if __name__ == "__main__":
    main()
