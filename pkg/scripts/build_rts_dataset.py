"""Build the bundled RTS-GMLC dataset directory from the MATPOWER case file.

The network tables (buses, branches, generators, piecewise cost curves) come
straight from ``case_RTS_GMLC.m`` as distributed with MATPOWER (``pip download
matpower``; the file lives in ``matpower/data/``).  The upstream hourly
time series are not redistributed with MATPOWER, so this script synthesises a
deterministic 8760-hour year instead: summer-peaking zonal load, wind that is
stronger in winter, solar on a 34 degN sun path, and monthly hydro factors.

Usage::

    python scripts/build_rts_dataset.py path/to/case_RTS_GMLC.m data/rts_gmlc
"""

from __future__ import annotations

import argparse
import csv
import re
from collections import Counter
from pathlib import Path

import numpy as np

SEED = 20210601
HOURS = 8760
MONTH_DAYS = [31, 28, 31, 30, 31, 30, 31, 31, 30, 31, 30, 31]
LATITUDE = np.deg2rad(34.0)


def read_matrix(text: str, name: str) -> np.ndarray:
    m = re.search(r"mpc\." + name + r" = \[(.*?)\];", text, re.S)
    rows = [
        [float(v) for v in line.strip().rstrip(";").split()]
        for line in m.group(1).strip().splitlines()
        if line.strip()
    ]
    return np.array(rows)


def read_names(text: str) -> list[str]:
    m = re.search(r"mpc\.bus_name = \{(.*?)\};", text, re.S)
    return [s.strip().strip(";").strip("'") for s in m.group(1).split()]


def unit_type(idx: int, pmax: float, cost_is_zero: bool) -> tuple[str, str]:
    """(Unit Type, Fuel label) for row ``idx`` of the MATPOWER gen table."""
    if idx == 157:
        return "STORAGE", "Storage"
    if pmax == 0:
        return "SYNC_COND", "Sync_Cond"
    if not cost_is_zero:
        return {
            20.0: ("CT", "Oil"),
            12.0: ("STEAM", "Oil"),
            76.0: ("STEAM", "Coal"),
            155.0: ("STEAM", "Coal"),
            350.0: ("STEAM", "Coal"),
            355.0: ("CC", "NG"),
            55.0: ("CT", "NG"),
            400.0: ("NUCLEAR", "Nuclear"),
        }[pmax]
    if 153 <= idx <= 156:
        return "WIND", "Wind"
    if idx == 116:
        return "CSP", "Solar"
    if 74 <= idx <= 95:
        return "HYDRO", "Hydro"
    return ("PV" if pmax >= 40 else "RTPV"), "Solar"


def month_of_hour() -> np.ndarray:
    days = np.repeat(np.arange(1, 13), MONTH_DAYS)
    return np.repeat(days, 24)


def load_profiles(rng: np.random.Generator, n_areas: int) -> np.ndarray:
    """Per-unit zonal load (fraction of the area's nominal peak)."""
    t = np.arange(HOURS)
    doy = t // 24
    hod = t % 24
    weekday = doy % 7  # day 0 is a Wednesday in the notional year; only weekends matter
    weekend = np.isin(weekday, (3, 4))
    seasonal = 0.66 + 0.26 * np.clip(np.cos(2 * np.pi * (doy - 200) / 365), 0, None) \
        + 0.05 * np.clip(np.cos(2 * np.pi * (doy - 15) / 365), 0, None)
    summer = np.clip(np.cos(2 * np.pi * (doy - 200) / 365), 0, 1)
    # evening peak in winter, late-afternoon peak in summer
    daily_winter = 0.78 + 0.12 * np.exp(-((hod - 19) ** 2) / 8) + 0.07 * np.exp(-((hod - 8) ** 2) / 6) \
        - 0.08 * np.exp(-((hod - 3.5) ** 2) / 5)
    daily_summer = 0.70 + 0.30 * np.exp(-((hod - 16.5) ** 2) / 18) - 0.06 * np.exp(-((hod - 4) ** 2) / 5)
    daily = (1 - summer) * daily_winter + summer * daily_summer
    base = seasonal * daily * np.where(weekend, 0.92, 1.0)
    out = np.empty((HOURS, n_areas))
    for a in range(n_areas):
        noise = np.zeros(HOURS)
        eps = rng.normal(0.0, 0.008, HOURS)
        for i in range(1, HOURS):
            noise[i] = 0.97 * noise[i - 1] + eps[i]
        out[:, a] = base * (1.0 + noise + 0.01 * a)
    return np.clip(out / out.max() * 0.93, 0.2, 0.93)


def wind_profiles(rng: np.random.Generator, n: int) -> np.ndarray:
    """Capacity factors in [0, 1]; a shared weather driver plus plant noise."""
    t = np.arange(HOURS)
    doy = t // 24
    hod = t % 24
    seasonal_mean = 0.4 * np.cos(2 * np.pi * (doy - 20) / 365)
    diurnal = 0.25 * np.cos(2 * np.pi * (hod - 2) / 24)

    def ar1(phi: float, sigma: float) -> np.ndarray:
        x = np.zeros(HOURS)
        eps = rng.normal(0.0, sigma, HOURS)
        for i in range(1, HOURS):
            x[i] = phi * x[i - 1] + eps[i]
        return x

    common = ar1(0.985, 0.17)
    out = np.empty((HOURS, n))
    for j in range(n):
        latent = seasonal_mean + diurnal + 0.85 * common + 0.5 * ar1(0.95, 0.16) - 0.3
        cf = 1.0 / (1.0 + np.exp(-2.2 * latent))
        out[:, j] = np.clip((cf - 0.05) / 0.9, 0.0, 1.0)
    return out


def solar_profile(rng: np.random.Generator) -> np.ndarray:
    t = np.arange(HOURS)
    doy = t // 24
    hod = (t % 24) + 0.5
    decl = np.deg2rad(23.44) * np.sin(2 * np.pi * (doy - 80) / 365)
    hour_angle = np.deg2rad(15.0 * (hod - 12.0))
    sin_elev = np.sin(LATITUDE) * np.sin(decl) + np.cos(LATITUDE) * np.cos(decl) * np.cos(hour_angle)
    clear = np.clip(sin_elev, 0.0, None) ** 1.2
    daily_cloud = np.clip(1.0 - rng.gamma(0.6, 0.12, 365), 0.25, 1.0)
    return clear * np.repeat(daily_cloud, 24)


def hydro_profile(rng: np.random.Generator) -> np.ndarray:
    monthly = np.array([0.45, 0.48, 0.58, 0.70, 0.78, 0.66, 0.52, 0.46, 0.40, 0.40, 0.42, 0.44])
    days = np.repeat(monthly[np.repeat(np.arange(12), MONTH_DAYS)], 24)
    return np.clip(days * (1.0 + rng.normal(0.0, 0.03, HOURS)), 0.0, 1.0)


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("case_file", type=Path)
    parser.add_argument("out_dir", type=Path)
    args = parser.parse_args()

    text = args.case_file.read_text()
    bus = read_matrix(text, "bus")
    gen = read_matrix(text, "gen")
    branch = read_matrix(text, "branch")
    gencost = read_matrix(text, "gencost")
    names = read_names(text)
    out = args.out_dir
    out.mkdir(parents=True, exist_ok=True)

    bus_type = {1: "PQ", 2: "PV", 3: "Ref"}
    with open(out / "bus.csv", "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["Bus ID", "Bus Name", "Bus Type", "MW Load", "Area"])
        for row, name in zip(bus, names):
            w.writerow([int(row[0]), name, bus_type[int(row[1])], f"{row[2]:g}", int(row[6])])

    pair_count: Counter = Counter()
    with open(out / "branch.csv", "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["UID", "From Bus", "To Bus", "X", "Cont Rating"])
        for row in branch:
            f, t = int(row[0]), int(row[1])
            key = (min(f, t), max(f, t))
            pair_count[key] += 1
            w.writerow([f"{key[0]}_{key[1]}_{pair_count[key]}", f, t, f"{row[3]:g}", f"{row[5]:g}"])

    uid_count: Counter = Counter()
    renewable_cols: list[tuple[str, str, float]] = []
    with open(out / "gen.csv", "w", newline="") as fh:
        w = csv.writer(fh)
        header = ["GEN UID", "Bus ID", "Unit Type", "Fuel", "PMax MW", "PMin MW"]
        header += [f"Curve MW {k}" for k in range(4)] + [f"Curve Cost {k}" for k in range(4)]
        w.writerow(header)
        for idx, (row, cost) in enumerate(zip(gen, gencost)):
            pts = cost[4:12].reshape(4, 2)
            zero = bool(np.all(pts[:, 1] == 0))
            utype, fuel = unit_type(idx, row[8], zero)
            b = int(row[0])
            uid_count[(b, utype)] += 1
            uid = f"{b}_{utype}_{uid_count[(b, utype)]}"
            if zero:
                curve = [""] * 8
            else:
                curve = [f"{v:g}" for v in pts[:, 0]] + [f"{v:.5f}" for v in pts[:, 1]]
            w.writerow([uid, b, utype, fuel, f"{row[8]:g}", f"{row[9]:g}", *curve])
            if utype in ("WIND", "PV", "RTPV", "CSP", "HYDRO"):
                renewable_cols.append((uid, utype, row[8]))

    rng = np.random.default_rng(SEED)
    areas = sorted({int(a) for a in bus[:, 6]})
    peak = {a: bus[bus[:, 6] == a, 2].sum() for a in areas}
    load = load_profiles(rng, len(areas))
    wind_uids = [u for u, ty, _ in renewable_cols if ty == "WIND"]
    wind = dict(zip(wind_uids, wind_profiles(rng, len(wind_uids)).T))
    solar = solar_profile(rng)
    hydro = hydro_profile(rng)

    columns: dict[str, np.ndarray] = {}
    for j, a in enumerate(areas):
        columns[f"load_area:{a}"] = load[:, j] * peak[a]
    for uid, ty, pmax in renewable_cols:
        if ty == "WIND":
            shape = wind[uid]
        elif ty == "HYDRO":
            shape = hydro
        elif ty == "RTPV":
            shape = 0.8 * solar
        else:
            shape = solar
        columns[uid] = shape * pmax

    month = month_of_hour()
    with open(out / "timeseries.csv", "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["Hour", "Month", *columns])
        stacked = np.column_stack(list(columns.values()))
        for h in range(HOURS):
            w.writerow([h, int(month[h]), *(f"{v:.2f}" for v in stacked[h])])


if __name__ == "__main__":
    main()
