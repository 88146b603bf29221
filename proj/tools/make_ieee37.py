#!/usr/bin/env python3
"""Writes the bundled IEEE 37-node feeder files into data/.

ieee37-unbalanced.json  three-phase, physical units (V, ohm, S, VA), delta loads.
ieee37-balanced.json    single-phase positive-sequence equivalent in per-unit
                        (1 MVA, 4.8 kV line-to-line).

The regulator at 799 is left out (the slack sits at 799) and XFM-1 is kept as
a series impedance referred to the 4.8 kV side, so every bus shares one
nominal voltage. Generators sit at 708, 732 and 744.
"""
import json
import math
import pathlib

FT_PER_MILE = 5280.0
V_LL = 4800.0
V_LN = V_LL / math.sqrt(3.0)
S_BASE = 1.0e6
Z_BASE = V_LL ** 2 / S_BASE

# Series impedance (ohm/mile): phase self terms, then ab/bc and ac mutuals.
# Shunt susceptance in uS/mile on the diagonal.
CONFIGS = {
    721: dict(self_ac=0.2926 + 0.1973j, self_b=0.2646 + 0.1900j, m_adj=0.0673 - 0.0368j, m_ac=0.0337 - 0.0417j, b=159.7919),
    722: dict(self_ac=0.4751 + 0.2973j, self_b=0.4488 + 0.2678j, m_adj=0.1629 - 0.0326j, m_ac=0.1234 - 0.0607j, b=127.8306),
    723: dict(self_ac=1.2936 + 0.6713j, self_b=1.3022 + 0.6326j, m_adj=0.4871 + 0.2111j, m_ac=0.4585 + 0.1521j, b=74.8405),
    724: dict(self_ac=2.0952 + 0.7758j, self_b=2.1068 + 0.7398j, m_adj=0.5204 + 0.2738j, m_ac=0.4926 + 0.2123j, b=60.2483),
}

SEGMENTS = [
    (799, 701, 1850, 721), (701, 702, 960, 722), (702, 705, 400, 724), (702, 713, 360, 723),
    (702, 703, 1320, 722), (703, 727, 240, 724), (703, 730, 600, 723), (704, 714, 80, 724),
    (704, 720, 800, 723), (705, 742, 320, 724), (705, 712, 240, 724), (706, 725, 280, 724),
    (707, 724, 760, 724), (707, 722, 120, 724), (708, 733, 320, 723), (708, 732, 320, 724),
    (709, 731, 600, 723), (709, 708, 320, 723), (710, 735, 200, 724), (710, 736, 1280, 724),
    (711, 741, 400, 723), (711, 740, 200, 724), (713, 704, 520, 723), (714, 718, 520, 724),
    (720, 707, 920, 724), (720, 706, 600, 723), (727, 744, 280, 723), (730, 709, 200, 723),
    (733, 734, 560, 723), (734, 737, 640, 723), (734, 710, 520, 724), (737, 738, 400, 723),
    (738, 711, 400, 723), (744, 728, 200, 724), (744, 729, 280, 724),
]
# XFM-1 (500 kVA, 0.09% + j1.81%) referred to the 4.8 kV side.
XFM = (709, 775, complex(0.0009, 0.0181) * V_LL ** 2 / 500e3)

# Delta loads: bus -> (model, {pair: (kW, kvar)}); pairs ab, bc, ca.
LOADS = {
    701: ("PQ", {"ab": (140, 70), "bc": (140, 70), "ca": (350, 175)}),
    712: ("PQ", {"ca": (85, 40)}),
    713: ("PQ", {"ca": (85, 40)}),
    714: ("I", {"ab": (17, 8), "bc": (21, 10)}),
    718: ("Z", {"ab": (85, 40)}),
    720: ("PQ", {"ca": (85, 40)}),
    722: ("I", {"bc": (140, 70), "ca": (21, 10)}),
    724: ("Z", {"bc": (42, 21)}),
    725: ("PQ", {"bc": (42, 21)}),
    727: ("PQ", {"ca": (42, 21)}),
    728: ("PQ", {"ab": (42, 21), "bc": (42, 21), "ca": (42, 21)}),
    729: ("I", {"ab": (42, 21)}),
    730: ("Z", {"ca": (85, 40)}),
    731: ("Z", {"bc": (85, 40)}),
    732: ("PQ", {"ca": (42, 21)}),
    733: ("I", {"ab": (85, 40)}),
    734: ("PQ", {"ca": (42, 21)}),
    735: ("PQ", {"ca": (85, 40)}),
    736: ("Z", {"bc": (42, 21)}),
    737: ("I", {"ab": (140, 70)}),
    738: ("PQ", {"ab": (126, 62)}),
    740: ("PQ", {"ca": (85, 40)}),
    741: ("PQ", {"ca": (42, 21)}),
    742: ("Z", {"ab": (8, 4), "bc": (85, 40)}),
    744: ("PQ", {"ab": (42, 21)}),
}
GENERATOR_BUSES = (708, 732, 744)
GENERATOR_CAP = 0.9  # MW and Mvar per generator
PAIRS = ("ab", "bc", "ca")
KEYS = {"PQ": "sp", "I": "si", "Z": "sz"}


def bus_order():
    names = {799}
    for a, b, _, _ in SEGMENTS:
        names.update((a, b))
    names.update(XFM[:2])
    return [799] + sorted(names - {799})


def phase_matrix(cfg):
    c = CONFIGS[cfg]
    return [
        [c["self_ac"], c["m_adj"], c["m_ac"]],
        [c["m_adj"], c["self_b"], c["m_adj"]],
        [c["m_ac"], c["m_adj"], c["self_ac"]],
    ]


def positive_sequence(cfg):
    z = phase_matrix(cfg)
    self_avg = sum(z[k][k] for k in range(3)) / 3
    mutual_avg = (z[0][1] + z[1][2] + z[0][2]) / 3
    return self_avg - mutual_avg


def unbalanced(index):
    buses = [dict(id=i, kind="slack" if i == 0 else "load", phases=3, v_nom=V_LN, name=str(n))
             for i, n in enumerate(index)]
    branches = []
    for a, b, ft, cfg in SEGMENTS:
        miles = ft / FT_PER_MILE
        z = phase_matrix(cfg)
        branches.append(dict(
            **{"from": index.index(a), "to": index.index(b)},
            r=[[z[i][j].real * miles for j in range(3)] for i in range(3)],
            x=[[z[i][j].imag * miles for j in range(3)] for i in range(3)],
            b_shunt=CONFIGS[cfg]["b"] * 1e-6 * miles))
    a, b, zt = XFM
    branches.append({"from": index.index(a), "to": index.index(b), "r": zt.real, "x": zt.imag})
    loads = []
    for bus, (model, pairs) in sorted(LOADS.items()):
        key = KEYS[model]
        re = [pairs.get(p, (0, 0))[0] * 1e3 for p in PAIRS]
        im = [pairs.get(p, (0, 0))[1] * 1e3 for p in PAIRS]
        loads.append({"bus": index.index(bus), f"{key}_re": re, f"{key}_im": im, "connection": "delta"})
    gens = [dict(bus=index.index(g), smax_re=GENERATOR_CAP * 1e6, smax_im=GENERATOR_CAP * 1e6, balanced=True)
            for g in GENERATOR_BUSES]
    slack = dict(re=[V_LN * math.cos(a) for a in (0, -2 * math.pi / 3, 2 * math.pi / 3)],
                 im=[V_LN * math.sin(a) for a in (0, -2 * math.pi / 3, 2 * math.pi / 3)])
    return dict(name="ieee37-unbalanced", s_base=S_BASE, buses=buses, branches=branches, loads=loads,
                generators=gens, slack_voltage=slack)


def balanced(index):
    buses = [dict(id=i, kind="slack" if i == 0 else "load", phases=1, name=str(n)) for i, n in enumerate(index)]
    branches = []
    for a, b, ft, cfg in SEGMENTS:
        miles = ft / FT_PER_MILE
        z1 = positive_sequence(cfg) * miles / Z_BASE
        branches.append({"from": index.index(a), "to": index.index(b), "r": z1.real, "x": z1.imag,
                         "b_shunt": CONFIGS[cfg]["b"] * 1e-6 * miles * Z_BASE})
    a, b, zt = XFM
    branches.append({"from": index.index(a), "to": index.index(b), "r": zt.real / Z_BASE, "x": zt.imag / Z_BASE})
    loads = []
    for bus, (model, pairs) in sorted(LOADS.items()):
        key = KEYS[model]
        p = sum(v[0] for v in pairs.values()) / 1e3
        q = sum(v[1] for v in pairs.values()) / 1e3
        loads.append({"bus": index.index(bus), f"{key}_re": p, f"{key}_im": q})
    gens = [dict(bus=index.index(g), smax_re=GENERATOR_CAP, smax_im=GENERATOR_CAP) for g in GENERATOR_BUSES]
    return dict(name="ieee37-balanced", buses=buses, branches=branches, loads=loads, generators=gens,
                slack_voltage=dict(re=1.0, im=0.0))


def two_bus():
    return dict(
        name="two-bus",
        buses=[dict(id=0, kind="slack"), dict(id=1, kind="load")],
        branches=[{"from": 0, "to": 1, "r": 0.01, "x": 0.01}],
        loads=[dict(bus=1, sp_re=0.1, sp_im=0.05)],
        generators=[dict(bus=1, smax_re=0.2, smax_im=0.2)],
        slack_voltage=dict(re=1.0, im=0.0))


def main():
    out = pathlib.Path(__file__).resolve().parent.parent / "data"
    out.mkdir(exist_ok=True)
    index = bus_order()
    for name, doc in (("ieee37-unbalanced", unbalanced(index)), ("ieee37-balanced", balanced(index)),
                      ("two-bus", two_bus())):
        (out / f"{name}.json").write_text(json.dumps(doc, indent=1) + "\n")


if __name__ == "__main__":
    main()
