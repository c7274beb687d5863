#!/usr/bin/env python3
"""Regenerates the synthetic 15-expert panel in survey.json.

The panel is deterministic (fixed seed). Bulk and balancing leak answers are
shifted so the compiled network's baseline grid scenario distribution lands
on the target vector; the script evaluates that distribution exactly by
summing over the external-factor configurations.
"""

import itertools
import json
import random
from pathlib import Path

HERE = Path(__file__).resolve().parent
SEED = 20350101
EXPERTS = 15

FACTORS = [
    "Acceptance", "Electrification", "Environment", "Geopolitics", "Investments",
    "Irradiance", "Land", "Policy", "Pricing", "Technology",
]

# component: (capacity mean GW, relative spread, {factor: effect %}, leak %)
COMPONENTS = {
    "LSNuclear": (5.0, None, {"Policy": 45, "Investments": 40, "Acceptance": 30}, 55),
    "SSNuclear": (0.2, 0.6, {"Policy": 35, "Technology": 30, "Acceptance": 20}, 15),
    "Hydro": (2.8, 0.12, {"Environment": 30, "Pricing": 35, "Land": 20}, 30),
    "Fossil": (0.5, 0.5, {"Policy": 40, "Pricing": 25, "Geopolitics": 20}, 20),
    "Gas": (1.6, 0.4, {"Geopolitics": 35, "Pricing": 30, "Policy": 20}, 25),
    "Bio": (2.6, 0.3, {"Land": 25, "Policy": 30, "Pricing": 30}, 30),
    "Wind": (19.0, 0.25, {"Pricing": 45, "Land": 25, "Electrification": 35}, 35),
    "Solar": (5.9, 0.3, {"Irradiance": 25, "Pricing": 35, "Technology": 40}, 35),
    "Battery": (1.1, 0.4, {"Pricing": 40, "Technology": 35, "Electrification": 15}, 10),
    "PumpedHydro": (0.6, 0.5, {"Land": 30, "Investments": 25, "Environment": 20}, 10),
    "DSR": (4.7, 0.3, {"Electrification": 45, "Pricing": 30, "Policy": 20}, 30),
    "P2X": (0.6, 0.5, {"Technology": 35, "Investments": 30, "Electrification": 20}, 15),
}

BULK = {"LSNuclear": 45, "Hydro": 50, "Gas": 25, "Bio": 15, "Fossil": 10, "SSNuclear": 5}
BALANCE = {"DSR": 40, "Battery": 35, "PumpedHydro": 15, "P2X": 10}
BULK_LEAK, BALANCE_LEAK = 15, 40

GRID_TABLE = [
    [22.9, 16.5, 29.4, 31.2],
    [24.9, 20.8, 39.5, 14.8],
    [31.0, 26.2, 30.3, 12.5],
    [53.2, 11.9, 26.7, 8.2],
]
STORAGE_TABLE = [
    [12.0, 10.0, 12.0, 66.0],
    [15.0, 14.0, 13.0, 58.0],
    [18.0, 21.0, 13.0, 48.0],
    [20.0, 24.0, 13.0, 43.0],
]
TARGET = [0.409, 0.170, 0.300, 0.121]

# Symmetric estimates averaging 5.0 GW with bucket means 2.5 and 7.5.
LSN_ESTIMATES = [3.5, 3.0, 2.5, 2.5, 2.0, 2.0, 2.0, 6.5, 7.0, 7.5, 7.5, 8.0, 8.0, 8.0]


def pool(answers):
    total = sum(c for _, c in answers)
    if total > 0:
        return sum(v * c for v, c in answers) / total
    return sum(v for v, _ in answers) / len(answers)


def clamp(v, lo=0.0, hi=100.0):
    return max(lo, min(hi, v))


def table_deviation(rng):
    rows = []
    for _ in range(4):
        d = [round(rng.uniform(-3, 3), 1) for _ in range(3)]
        rows.append(d + [round(-sum(d), 1)])
    return rows


def build_panel(rng):
    experts = []
    for i in range(EXPERTS):
        experts.append({"id": f"E{i + 1:02d}", "confidence_default": rng.choice(range(50, 90, 5))})

    for comp, (mean, spread, effects, leak) in COMPONENTS.items():
        designated = sorted(effects)
        others = [f for f in FACTORS if f not in effects]
        lsn = iter(LSN_ESTIMATES)
        for k, e in enumerate(experts):
            if comp == "LSNuclear":
                if k == EXPERTS - 1:
                    pass
                else:
                    e.setdefault("qs1a", {})[comp] = {"capacity_gw": next(lsn), "confidence": 70}
            else:
                gw = max(0.0, round(mean * (1 + rng.gauss(0, spread)), 1))
                e.setdefault("qs1a", {})[comp] = {"capacity_gw": gw, "confidence": rng.choice(range(40, 95, 5))}

            named = list(designated)
            if rng.random() < 0.2:
                named[rng.randrange(3)] = rng.choice(others)
            rng.shuffle(named)
            e.setdefault("qs1b", {})[comp] = named

            rated = {}
            for f, mu in effects.items():
                entry = {"effect": int(clamp(round(mu + rng.gauss(0, 8))))}
                if rng.random() < 0.7:
                    entry["confidence"] = rng.choice(range(40, 95, 5))
                rated[f] = entry
            leak_entry = {"effect": int(clamp(round(leak + rng.gauss(0, 8))))}
            if rng.random() < 0.7:
                leak_entry["confidence"] = rng.choice(range(40, 95, 5))
            e.setdefault("qs1c", {})[comp] = {"effects": rated, "leak": leak_entry}

    for key, members, leak in (("qs3b", BULK, BULK_LEAK), ("qs3a", BALANCE, BALANCE_LEAK)):
        for e in experts:
            effects = {}
            for m, mu in members.items():
                effects[m] = {"effect": int(clamp(round(mu + rng.gauss(0, 6)))),
                              "confidence": rng.choice(range(40, 95, 5))}
            e[key] = {"effects": effects,
                      "leak": {"effect": float(clamp(round(leak + rng.gauss(0, 6)))),
                               "confidence": rng.choice(range(40, 95, 5))}}

    for key, base in (("qs4", GRID_TABLE), ("qs2", STORAGE_TABLE)):
        experts[0][key] = {"rows": [list(r) for r in base], "confidence": 75}
        for p in range(1, EXPERTS, 2):
            d = table_deviation(rng)
            conf = rng.choice(range(50, 95, 5))
            for sign, e in ((1, experts[p]), (-1, experts[p + 1])):
                rows = [[round(b + sign * x, 1) for b, x in zip(br, dr)] for br, dr in zip(base, d)]
                e[key] = {"rows": rows, "confidence": conf}
    return experts


def conf(e, entry):
    return entry.get("confidence", e["confidence_default"])


def top3(experts, comp):
    counts = {}
    for e in experts:
        for f in set(e["qs1b"].get(comp, [])):
            counts[f] = counts.get(f, 0) + 1
    ranked = sorted(counts.items(), key=lambda kv: (-kv[1], kv[0]))
    return [f for f, _ in ranked[:3]]


def ici(experts, pick, factors):
    thetas = []
    for f in factors:
        answers = [(a["effects"][f]["effect"], conf(e, a["effects"][f]))
                   for e in experts if (a := pick(e)) and f in a["effects"]]
        thetas.append(pool(answers) / 100)
    leak = pool([(pick(e)["leak"]["effect"], conf(e, pick(e)["leak"])) for e in experts]) / 100
    return thetas, leak


def grid_cpt(experts):
    rows = []
    for r in range(4):
        row = [pool([(e["qs4"]["rows"][r][k], e["qs4"]["confidence"]) for e in experts]) / 100
               for k in range(4)]
        s = sum(row)
        rows.append([v / s for v in row])
    return rows


def baseline(experts):
    parents = {c: top3(experts, c) for c in COMPONENTS}
    for c, (_, _, effects, _) in COMPONENTS.items():
        assert sorted(parents[c]) == sorted(effects), (c, parents[c])
    comp_params = {c: ici(experts, lambda e, c=c: e["qs1c"][c], parents[c]) for c in COMPONENTS}
    bulk = ici(experts, lambda e: e["qs3b"], list(BULK))
    bal = ici(experts, lambda e: e["qs3a"], list(BALANCE))

    joint = [[0.0, 0.0], [0.0, 0.0]]
    for config in itertools.product([0, 1], repeat=len(FACTORS)):
        on = {f for f, v in zip(FACTORS, config) if v}
        p_high = {}
        for c, (thetas, leak) in comp_params.items():
            q = 1 - leak
            for f, t in zip(parents[c], thetas):
                if f in on:
                    q *= 1 - t
            p_high[c] = 1 - q

        def total(params, members):
            thetas, leak = params
            q = 1 - leak
            for m, t in zip(members, thetas):
                q *= 1 - t * p_high[m]
            return 1 - q

        pb = total(bulk, list(BULK))
        pc = total(bal, list(BALANCE))
        w = 0.5 ** len(FACTORS)
        joint[1][1] += w * pb * pc
        joint[1][0] += w * pb * (1 - pc)
        joint[0][1] += w * (1 - pb) * pc
        joint[0][0] += w * (1 - pb) * (1 - pc)
    cpt = grid_cpt(experts)
    dist = [sum(joint[b][c] * cpt[2 * b + c][k] for b in (0, 1) for c in (0, 1)) for k in range(4)]
    return dist, joint


def shift_leak(experts, key, delta):
    for e in experts:
        e[key]["leak"]["effect"] = round(clamp(e[key]["leak"]["effect"] + delta), 2)


def error(experts):
    dist, _ = baseline(experts)
    return max(abs(d - t) for d, t in zip(dist, TARGET))


def tune(experts):
    """Coordinate search over uniform shifts of the two leak answer sets."""
    step = 4.0
    while step >= 0.01:
        improved = True
        while improved:
            improved = False
            for key in ("qs3b", "qs3a"):
                for sign in (1, -1):
                    before = error(experts)
                    shift_leak(experts, key, sign * step)
                    if error(experts) < before - 1e-12:
                        improved = True
                    else:
                        shift_leak(experts, key, -sign * step)
        step /= 2


def main():
    rng = random.Random(SEED)
    experts = build_panel(rng)
    tune(experts)
    dist, joint = baseline(experts)
    p_bulk = joint[1][0] + joint[1][1]
    p_bal = joint[0][1] + joint[1][1]
    print("baseline grid:", [round(d, 6) for d in dist])
    print(f"P(bulk high) = {p_bulk:.6f}, P(balance high) = {p_bal:.6f}, "
          f"cov = {joint[1][1] - p_bulk * p_bal:.6f}")
    assert error(experts) < 0.0008, error(experts)
    (HERE / "survey.json").write_text(json.dumps({"experts": experts}, indent=1) + "\n")


if __name__ == "__main__":
    main()
