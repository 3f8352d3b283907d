"""Acceptance suite: one test per criterion, each recording a pass/fail line.

Run on its own with ``pytest tests/test_acceptance.py -v``; the summary
block at the end of the pytest output lists every criterion.
"""

import json
import math
import os
import random
import time
from dataclasses import replace
from fractions import Fraction

import numpy as np
import pytest
from scipy.stats import spearmanr

import oracles
from pcrm.cli import main
from pcrm.config import with_strategy
from pcrm.dataio import GeoBox, Hotspot, SyntheticSpec, generate, ingest_csv
from pcrm.geometry import (
    AdaptiveState,
    PolarFrame,
    adaptive_factor,
    in_oval_zone,
    in_source_zone,
    in_triangle_zone,
)
from pcrm.matching import StrategyConfig, Trapezoid, apply_decision, ddm_match, og_match, pcrm_match
from pcrm.metrics import ici, msi, sai, ui
from pcrm.model import Point, TripRequest, Vehicle, Weights, ZoneParams
from pcrm.sim import SimConfig, run

pytestmark = pytest.mark.slow


# -- shared workloads -----------------------------------------------------------

def trend_workload():
    """10,000 requests over a 5 km square with two commuting flows plus background."""
    spec = SyntheticSpec(
        rates=(30.0,) * 6,
        region=(0, 0, 5, 5),
        origins=(Hotspot(1.5, 1.5, 0.5, 0.4), Hotspot(3.5, 3.0, 0.6, 0.4), Hotspot(2.5, 2.5, 1.5, 0.2)),
        destinations=(Hotspot(3.5, 3.5, 0.5, 0.4), Hotspot(1.5, 3.0, 0.6, 0.3),
                      Hotspot(2.5, 2.5, 1.5, 0.3)),
        seed=11,
        min_trip_km=0.5,
    )
    reqs = generate(spec)[:10_000]
    assert len(reqs) == 10_000
    return reqs


def trend_config(reqs):
    # a full patience period after the last release so late requests get a fair chance
    return SimConfig(tick=0.5, fleet_size=200, region=(0, 0, 5, 5), seed=5,
                     horizon=reqs[-1].release_time + 20.0)


_CACHE = {}


def _trend():
    if "trend" not in _CACHE:
        _CACHE["trend"] = trend_workload()
    return _CACHE["trend"]


# -- 1. geometry oracle suite ----------------------------------------------------

def test_criterion_1_geometry_oracles(acceptance):
    n = 100_000
    rng = np.random.default_rng(2024)
    start = time.perf_counter()

    def instances():
        pole = rng.uniform(-5, 5, (n, 2))
        ref = pole + rng.normal(0, 2, (n, 2))
        q = pole + rng.normal(0, 1.5, (n, 2))
        return pole, ref, q

    pole, ref, q = instances()
    R = rng.uniform(0.1, 3, n)
    n_s = rng.uniform(0.01, 2, n)
    expect = oracles.source_zone_oracle(pole, ref, q, R, n_s)
    got = np.array([in_source_zone(PolarFrame.toward(Point(*p), Point(*r)), Point(*x), a, b)
                    for p, r, x, a, b in zip(pole.tolist(), ref.tolist(), q.tolist(), R, n_s)])
    bad_src = int((expect != got).sum())

    pole, nxt, q = instances()
    n_d = rng.uniform(0.01, 1, n)
    expect = oracles.oval_zone_oracle(pole, nxt, q, n_d)
    got = np.array([in_oval_zone(Point(*p), Point(*r), Point(*x), b)
                    for p, r, x, b in zip(pole.tolist(), nxt.tolist(), q.tolist(), n_d)])
    bad_oval = int((expect != got).sum())

    prev, tail, q = instances()
    phi = rng.uniform(0.5, 90, n)
    expect = oracles.triangle_zone_oracle(prev, tail, q, phi)
    got = np.array([in_triangle_zone(Point(*p), Point(*t), Point(*x), f)
                    for p, t, x, f in zip(prev.tolist(), tail.tolist(), q.tolist(), phi)])
    bad_tri = int((expect != got).sum())

    elapsed = time.perf_counter() - start
    ok = bad_src == bad_oval == bad_tri == 0 and elapsed < 10
    acceptance(1, ok, f"disagreements source={bad_src} oval={bad_oval} triangle={bad_tri} "
                      f"on {n} instances each, {elapsed:.1f}s (limit 10s)")
    assert ok


# -- 2. adaptive factor identities ------------------------------------------------

def test_criterion_2_adaptive_factor(acceptance):
    C_w, C_t, tau = 1.1, 1.0, 20.0
    zero_ok = all(adaptive_factor(N, AdaptiveState(0, T, T), C_w, C_t, tau) == N
                  for N in (2.0, 1.0, 1.5, 0.3) for T in (0.0, 4.0, 17.5))
    # trip shorter than the solo estimate counts as no delay
    zero_ok &= adaptive_factor(2.0, AdaptiveState(0, 3.0, 5.0), C_w, C_t, tau) == 2.0

    def decreasing(make):
        vals = [adaptive_factor(2.0, make(x), C_w, C_t, tau) for x in np.linspace(0, 60, 6001)]
        floor_hit = False
        for a, b in zip(vals, vals[1:]):
            if a <= 0.01:
                floor_hit = True
                if b != 0.01:
                    return False
            elif not b < a:
                return False
        return floor_hit

    wait_ok = decreasing(lambda x: AdaptiveState(x, 5.0, 5.0))
    trip_ok = decreasing(lambda x: AdaptiveState(0.0, 5.0 + x, 5.0))
    value = adaptive_factor(2.0, AdaptiveState(10.0, 8.0, 8.0), C_w, C_t, tau)
    target = 2 - (math.exp(0.55) - 1)
    value_ok = abs(value - target) <= 1e-12
    ok = zero_ok and wait_ok and trip_ok and value_ok
    acceptance(2, ok, f"zero-delay identity={zero_ok} decreasing(wait)={wait_ok} "
                      f"decreasing(trip)={trip_ok} value={value!r} vs {target!r}")
    assert ok


# -- 3. metric identities ----------------------------------------------------------

def _completed(i, dist, wait, trip):
    r = TripRequest(i, (0.0, 0.0), (dist, 0.0), 0.0, 20)
    r.assign(0.0, 0)
    r.pick_up(wait)
    r.drop_off(wait + trip)
    return r


def test_criterion_3_metric_identities(acceptance):
    checks = {}
    pooled = run(SimConfig(horizon=5, fleet_size=1, strategy=StrategyConfig("pcrm")),
                 [TripRequest(i, (1.0, 1.0), (2.0, 3.0), 0.0, 20) for i in range(2)],
                 [Vehicle(0, Point(1, 1), capacity=2)])
    checks["msi pooled pair == 1"] = pooled.report.msi == 1
    single = run(SimConfig(horizon=5, fleet_size=1, strategy=StrategyConfig("pcrm")),
                 [TripRequest(0, (1.0, 1.0), (2.5, 0.25), 0.0, 20)], [Vehicle(0, Point(1, 1))])
    checks["msi single rider == 0"] = single.report.msi == 0

    done = [_completed(i, 1.0, 0.5, 3.0) for i in range(5)]
    lost = []
    for i in range(5, 7):
        r = TripRequest(i, (0.0, 0.0), (1.0, 0.0), 0.0, 20)
        r.reject()
        lost.append(r)
    s = sai(done + lost)
    checks["sai 5/7 exact"] = Fraction(s) == Fraction(5 / 7) and s * 7 == pytest.approx(5, abs=0)
    checks["sai empty == 1"] = sai([]) == 1

    w = Weights()
    base = ui(0.3, 0.8, 4.0, w)
    checks["ui signs"] = (ui(0.4, 0.8, 4.0, w) > base and ui(0.3, 0.9, 4.0, w) > base
                          and ui(0.3, 0.8, 5.0, w) < base)
    checks["ui affine"] = (ui(0.3, 0.8, 4.0, w) == 0.3 + 0.8 - 0.1 * 4.0
                           and ui(0, 1, 0, w) == 1.0 and ui(0.7, 0.6, 9.0, Weights(0, 1, 0)) == 0.6)

    rng = random.Random(3)
    riders = [_completed(i, rng.uniform(0.2, 5), rng.uniform(0, 20), rng.uniform(0.1, 40))
              for i in range(200)]
    checks["ici zero weights"] = ici(riders, 0.0, 0.0, 0.35) == 0
    checks["msi from (single, share)"] = msi([(6.0, 3.0)], 2) == 1 and msi([(3.0, 3.0)], 1) == 0

    ok = all(checks.values())
    failed = [k for k, v in checks.items() if not v]
    acceptance(3, ok, f"{len(checks) - len(failed)}/{len(checks)} exact identities hold"
                      + (f"; failed: {failed}" if failed else ""))
    assert ok


# -- 4. enumeration-oracle matching --------------------------------------------------

def test_criterion_4_enumeration_oracle(acceptance):
    rng = random.Random(404)
    instances = 0
    compared = {"pcrm": 0, "ddm": 0, "og": 0}
    disagree = {"pcrm": 0, "ddm": 0, "og": 0}
    trap = Trapezoid(0.6, 2.0, 2.5)
    ddm_cfg = StrategyConfig("ddm", ddm_trapezoid=trap)
    while instances < 300:
        grid = instances % 3 == 0
        fleet, requests = oracles.random_instance(rng, grid=grid)
        assert len(fleet) <= 4 and all(len(v.route) <= 8 for v in fleet) and len(requests) <= 3
        zone = ZoneParams(R_s=rng.uniform(0.5, 3), phi=rng.uniform(20, 90))
        factors = {v.id: (rng.uniform(0.01, 2), rng.uniform(0.01, 1)) for v in fleet}
        effective = {v.id: factors[v.id] if v.onboard else (zone.N_s, zone.N_d) for v in fleet}
        for kind in ("pcrm", "ddm", "og"):
            own = [Vehicle(v.id, v.position, v.capacity, route=list(v.route), onboard=set(v.onboard))
                   for v in fleet]
            for r in requests:
                if kind == "pcrm":
                    dec = pcrm_match(r, own, zone, 0, factors=lambda v: factors[v.id])
                    expect = oracles.pcrm_oracle(r, own, zone, effective)
                elif kind == "ddm":
                    dec = ddm_match(r, own, ddm_cfg, 0)
                    expect = oracles.ddm_oracle(r, own, trap)
                else:
                    dec = og_match(r, own, 0)
                    expect = oracles.og_oracle(r, own)
                compared[kind] += 1
                got = None if dec is None else (dec.vehicle_id, dec.pickup_index, dec.dropoff_index)
                same = (got is None and expect is None) or (
                    got is not None and expect is not None and got == expect[1:]
                    and abs(dec.added_distance - expect[0]) <= 1e-9)
                disagree[kind] += not same
                if dec is not None:
                    apply_decision(own[[v.id for v in own].index(dec.vehicle_id)], r, dec)
        instances += 1
    ok = instances >= 200 and sum(disagree.values()) == 0
    acceptance(4, ok, f"{instances} instances; decisions compared {compared}; "
                      f"disagreements {disagree}")
    assert ok


# -- 5. ICI trend in R_s ---------------------------------------------------------------

GRID_RS = (0.5, 0.6, 0.7, 0.8, 0.9, 1.0)


def test_criterion_5_ici_trend(acceptance):
    reqs = _trend()
    base = trend_config(reqs)
    start = time.perf_counter()
    means = []
    for rs in GRID_RS:
        means.append(run(with_strategy(base, "pcrm", R_s=rs, phi=60.0), reqs).report.ici_mean)
    elapsed = time.perf_counter() - start
    rho = spearmanr(GRID_RS, means).statistic
    ok = rho >= 0.8 and elapsed < 300
    series = ", ".join(f"{rs}:{m:.3f}" for rs, m in zip(GRID_RS, means))
    acceptance(5, ok, f"Spearman rho={rho:.3f} (need >= 0.8) over mean ICI [{series}] at phi=60, "
                      f"{len(reqs)} requests/200 vehicles, {elapsed:.0f}s (limit 300s)")
    assert ok


# -- 6. saturation -------------------------------------------------------------------

def test_criterion_6_saturation(acceptance):
    reqs = _trend()
    cfg = with_strategy(replace(trend_config(reqs), fleet_size=400), "pcrm", R_s=5.0, phi=90.0)
    rep = run(cfg, reqs).report
    ok = rep.sai >= 0.999
    acceptance(6, ok, f"SAI={rep.sai:.4f} (need >= 0.999) with R_s=5 km, phi=90, 400 vehicles; "
                      f"served {rep.served}/{rep.total_requests}")
    assert ok


# -- 7. PCRM vs OG ordering ---------------------------------------------------------

POOLED_WORKLOADS = {
    "two-hotspot exchange": (Hotspot(1, 1, 0.4, 0.5), Hotspot(3, 3, 0.4, 0.5)),
    "three-hotspot ring": (Hotspot(1, 1, 0.4, 1 / 3), Hotspot(3, 1, 0.4, 1 / 3),
                           Hotspot(2, 3, 0.4, 1 - 2 / 3)),
    "central hub": (Hotspot(2, 2, 0.4, 0.5), Hotspot(2, 2, 1.5, 0.5)),
}


def test_criterion_7_pcrm_beats_og(acceptance):
    margins = {}
    for k, (name, mix) in enumerate(POOLED_WORKLOADS.items()):
        reqs = generate(SyntheticSpec(rates=(8.0, 8.0), region=(0, 0, 4, 4), origins=mix,
                                      destinations=mix, seed=100 + k, min_trip_km=0.5))
        base = SimConfig(fleet_size=60, region=(0, 0, 4, 4), seed=200 + k, tick=0.5, horizon=140.0)
        pcrm = run(with_strategy(base, "pcrm"), reqs).report
        og = run(with_strategy(base, "og"), reqs).report
        margins[name] = (pcrm.ui, og.ui)
    ok = all(p >= o for p, o in margins.values())
    detail = "; ".join(f"{n}: UI pcrm={p:.3f} og={o:.3f} margin={p - o:+.3f}"
                       for n, (p, o) in margins.items())
    acceptance(7, ok, detail)
    assert ok


# -- 8. real-data magnitudes (optional) -------------------------------------------------

def test_criterion_8_real_data(acceptance):
    """Needs PCRM_NYC_EXTRACT=<trip CSV>; PCRM_NYC_CONFIG may name a JSON with
    ``bbox``, ``window_start``/``window_end``, ``columns``, ``fleet_size`` and ``hours``."""
    path = os.environ.get("PCRM_NYC_EXTRACT")
    if not path:
        acceptance(8, True, "no trip-record extract supplied (set PCRM_NYC_EXTRACT); "
                            "non-blocking", skipped=True)
        pytest.skip("no trip-record extract supplied")
    from datetime import datetime

    opts = {}
    if os.environ.get("PCRM_NYC_CONFIG"):
        opts = json.loads(open(os.environ["PCRM_NYC_CONFIG"]).read())
    box = GeoBox(**opts.get("bbox", {"lat_min": 40.70, "lat_max": 40.82,
                                     "lon_min": -74.02, "lon_max": -73.93}))
    start = datetime.fromisoformat(opts["window_start"]) if opts.get("window_start") else None
    end = datetime.fromisoformat(opts["window_end"]) if opts.get("window_end") else None
    res = ingest_csv(path, box=box, window=(start, end) if start else None,
                     columns=opts.get("columns"))
    reqs = res.requests
    proj = box.projection()
    lo = proj.to_km(box.lat_min, box.lon_min)
    hi = proj.to_km(box.lat_max, box.lon_max)
    cfg = SimConfig(tick=0.5, fleet_size=int(opts.get("fleet_size", 3000)),
                    region=(lo[0], lo[1], hi[0], hi[1]), seed=1,
                    horizon=reqs[-1].release_time + 20.0)
    rep = run(cfg, reqs).report
    ok = (abs(rep.msi - 0.38) <= 0.08 and rep.sai >= 0.99
          and abs(rep.mean_extra_trip_minutes - 3.8) <= 1.5)
    acceptance(8, ok, f"MSI={rep.msi:.3f} (0.38+-0.08) SAI={rep.sai:.4f} (>=0.99) "
                      f"extra trip={rep.mean_extra_trip_minutes:.2f} min (3.8+-1.5); "
                      f"{len(reqs)} requests; non-blocking")
    # non-blocking: the outcome is reported, not asserted


# -- 9. manifest determinism ------------------------------------------------------------

def test_criterion_9_manifest_determinism(acceptance, tmp_path):
    spec = tmp_path / "spec.json"
    spec.write_text(json.dumps({"rates": [2.0], "region": [0, 0, 3, 3], "seed": 8,
                                "origins": [{"x": 1.5, "y": 1.5, "std": 0.8, "weight": 1.0}],
                                "min_trip_km": 0.3}))
    work = tmp_path / "trips.csv"
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"horizon": 60, "fleet_size": 20, "region": [0, 0, 3, 3], "seed": 3}))
    assert main(["gen", "--spec", str(spec), "--out", str(work)]) == 0
    results = {}
    commands = {
        "run": [],
        "sweep": ["--grid-rs", "0.5,0.8", "--grid-phi", "45,90"],
        "compare": ["--strategy", "pcrm,ddm,og"],
    }
    for cmd, extra in commands.items():
        first = tmp_path / f"{cmd}-1"
        second = tmp_path / f"{cmd}-2"
        assert main([cmd, "--config", str(cfg), "--workload", str(work), "--out", str(first),
                     *extra]) == 0
        assert main([cmd, "--config", str(first / "manifest.json"), "--out", str(second)]) == 0
        csvs = sorted(p.name for p in first.glob("*.csv"))
        same = bool(csvs) and all((first / n).read_bytes() == (second / n).read_bytes() for n in csvs)
        results[cmd] = (same, csvs)
    ok = all(same for same, _ in results.values())
    acceptance(9, ok, "; ".join(f"{c}: {'identical' if s else 'DIFFERENT'} {names}"
                                for c, (s, names) in results.items()))
    assert ok
