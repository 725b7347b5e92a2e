"""Reproducible experiment driver.

Configs are flat ``key = value`` text files ('#' starts a comment); the
documented keys per experiment are listed in the README.  Identical
config and seed produce byte-identical CSV result rows; the only
non-deterministic output line is the timestamp comment at the top of the
file.  Every row carries the seed and parameters needed to reproduce it
in isolation.

Exit status: 0 on success, 1 on a validation error (the offending field
is named), 2 when a runtime enumeration cap is exceeded.
"""

from __future__ import annotations

import argparse
import csv
import datetime
import sys
from typing import List, Optional, Tuple

import numpy as np

from . import capacity as cap_mod
from . import channel_codec, crng_sampler, decision_theory, ensembles, sw_codec
from .errors import CapExceededError, ConfigError
from .gf_linalg import FieldSpec, GfVector, matvec
from .rng import make_rng
from .sources_channels import (Channel, info_measures, joint_from_channel,
                               make_bsc, make_dsbs, make_quantized_awgn, make_zchannel)

EXPERIMENTS = ("capacity", "hash-verify", "sw", "channel", "decision", "crng-test")


# ---------------------------------------------------------------------------
# config handling
# ---------------------------------------------------------------------------

def parse_config(path: str) -> dict:
    cfg = {}
    with open(path) as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ConfigError(f"line {lineno}", f"expected 'key = value', got {raw.strip()!r}")
            key, value = line.split("=", 1)
            cfg[key.strip()] = value.strip()
    return cfg


def _req(cfg: dict, key: str) -> str:
    if key not in cfg:
        raise ConfigError(key, "required key is missing")
    return cfg[key]


def _get_int(cfg: dict, key: str, default: Optional[int] = None) -> int:
    raw = cfg.get(key)
    if raw is None:
        if default is None:
            raise ConfigError(key, "required key is missing")
        return default
    try:
        return int(raw)
    except ValueError as exc:
        raise ConfigError(key, f"not an integer: {raw!r}") from exc


def _get_float(cfg: dict, key: str, default: Optional[float] = None) -> float:
    raw = cfg.get(key)
    if raw is None:
        if default is None:
            raise ConfigError(key, "required key is missing")
        return default
    try:
        return float(raw)
    except ValueError as exc:
        raise ConfigError(key, f"not a number: {raw!r}") from exc


def _get_list(cfg: dict, key: str, conv=float) -> list:
    raw = _req(cfg, key)
    try:
        return [conv(tok.strip()) for tok in raw.split(",") if tok.strip()]
    except ValueError as exc:
        raise ConfigError(key, f"not a comma-separated list: {raw!r}") from exc


def _get_choice(cfg: dict, key: str, choices, default: Optional[str] = None) -> str:
    raw = cfg.get(key, default)
    if raw is None:
        raise ConfigError(key, "required key is missing")
    if raw not in choices:
        raise ConfigError(key, f"must be one of {sorted(choices)}, got {raw!r}")
    return raw


def _make_channel(cfg: dict) -> Channel:
    kind = _get_choice(cfg, "channel", {"bsc", "zchannel", "quantized-awgn"})
    if kind == "bsc":
        return make_bsc(_get_float(cfg, "p"))
    if kind == "zchannel":
        return make_zchannel(_get_float(cfg, "p"))
    return make_quantized_awgn(_get_float(cfg, "snr"), _get_int(cfg, "levels"))


def _make_ensemble(cfg: dict, field: FieldSpec, l: int, n: int) -> ensembles.EnsembleSpec:
    kind = _get_choice(cfg, "ensemble",
                       {"uniform-linear", "systematic-sparse", "expurgated-uniform"},
                       default="uniform-linear")
    if kind == "uniform-linear":
        return ensembles.uniform_ensemble(field, l, n)
    if kind == "systematic-sparse":
        return ensembles.sparse_ensemble(field, l, n, _get_int(cfg, "row_weight"))
    return ensembles.expurgate(ensembles.uniform_ensemble(field, l, n),
                               _get_float(cfg, "gamma"))


# ---------------------------------------------------------------------------
# advisory validation (warnings only; hard errors raise ConfigError)
# ---------------------------------------------------------------------------

def validate(experiment: str, cfg: dict) -> List[str]:
    """Rate-condition warnings; the run is still permitted (converse
    regimes are legitimate experiments)."""
    warnings: List[str] = []
    if experiment == "sw":
        source = make_dsbs(_get_float(cfg, "p"))
        h = info_measures(source).h_x_given_y
        for r in _get_list(cfg, "rates"):
            if r <= h:
                warnings.append(f"rate {r} <= H(X|Y) = {h:.4f}: decay not expected")
    elif experiment == "channel":
        channel = _make_channel(cfg)
        px = np.full(channel.input_size, 1.0 / channel.input_size)
        measures = info_measures(joint_from_channel(px, channel))
        r = _get_float(cfg, "r")
        big_r = _get_float(cfg, "R")
        if r <= measures.h_x_given_y:
            warnings.append(f"r = {r} <= H(X|Y) = {measures.h_x_given_y:.4f}")
        if r + big_r >= measures.h_x:
            warnings.append(f"r + R = {r + big_r} >= H(X) = {measures.h_x:.4f}")
    return warnings


# ---------------------------------------------------------------------------
# experiments
# ---------------------------------------------------------------------------

def _run_capacity(cfg: dict, seed: int, threads: int) -> Tuple[List[str], List[dict]]:
    channel = _make_channel(cfg)
    tol = _get_float(cfg, "tol", 1e-9)
    params = repr(channel.param)
    header = ["channel", "params", "support", "capacity", "iterations", "tol"]
    rows = []
    if "q_values" in cfg:
        q_values = _get_list(cfg, "q_values", conv=int)
        for qv, res in zip(q_values, cap_mod.signaling_sweep(channel, q_values, tol=tol)):
            rows.append({"channel": channel.kind, "params": params,
                         "support": "|S|<=" + str(qv) + ":" + "+".join(map(str, res.support)),
                         "capacity": res.capacity, "iterations": res.iterations, "tol": tol})
    else:
        res = cap_mod.blahut_arimoto(channel, tol=tol)
        rows.append({"channel": channel.kind, "params": params,
                     "support": "+".join(map(str, res.support)),
                     "capacity": res.capacity, "iterations": res.iterations, "tol": tol})
    return header, rows


def _run_hash_verify(cfg: dict, seed: int, threads: int) -> Tuple[List[str], List[dict]]:
    field = FieldSpec(_get_int(cfg, "q", 2))
    l, n = _get_int(cfg, "l"), _get_int(cfg, "n")
    gamma = _get_float(cfg, "gamma", 0.0)
    pairs = _get_int(cfg, "pairs", 20)
    spec = _make_ensemble(cfg, field, l, n)
    # the type-spectrum pair assumes type-invariant collision probabilities;
    # 'certified' computes the direct pairwise-collision pair instead, which
    # is the valid choice for the systematic-sparse kind
    source = _get_choice(cfg, "params", {"spectrum", "certified"}, default="spectrum")
    if source == "certified":
        params = ensembles.certified_collision_params(spec)
    elif spec.kind == ensembles.EXPURGATED:
        params = ensembles.compute_hash_params(spec)
    else:
        params = ensembles.compute_hash_params(spec, gamma=gamma)
    report = ensembles.certify_hash_property(
        spec, params,
        partition_pairs=ensembles.random_partition_pairs(field, n, pairs, seed),
        collision_pairs=ensembles.random_collision_pairs(field, n, pairs, seed + 1),
        gamma=spec.gamma if spec.kind == ensembles.EXPURGATED else gamma)
    row = report.csv_row()
    return list(row.keys()), [row]


def _run_sw(cfg: dict, seed: int, threads: int) -> Tuple[List[str], List[dict]]:
    source = make_dsbs(_get_float(cfg, "p"))
    rows = sw_codec.rate_sweep(
        source,
        rates=_get_list(cfg, "rates"),
        ns=_get_list(cfg, "ns", conv=int),
        trials=_get_int(cfg, "trials", 10000),
        seed=seed,
        decoder=_get_choice(cfg, "decoder", {"map-exact", "stochastic"}, default="map-exact"),
        matrices_per_point=_get_int(cfg, "matrices", 1))
    header = ["source", "p", "n", "l", "rate", "decoder", "mode",
              "error", "std_err", "trials", "seed"]
    return header, rows


def _run_channel(cfg: dict, seed: int, threads: int) -> Tuple[List[str], List[dict]]:
    channel = _make_channel(cfg)
    n = _get_int(cfg, "n")
    field = FieldSpec(channel.input_size)
    l_a = sw_codec.rows_for_rate(n, _get_float(cfg, "r"), field.q)
    l_b = sw_codec.rows_for_rate(n, _get_float(cfg, "R"), field.q)
    if l_a == 0 or l_b == 0:
        raise ConfigError("r" if l_a == 0 else "R", "target rate rounds to an empty map")
    px = np.full(field.q, 1.0 / field.q)
    source = joint_from_channel(px, channel)
    a = ensembles.sample_map(ensembles.uniform_ensemble(field, l_a, n),
                             np.random.default_rng(sw_codec.derived_seed(seed, 99)))
    decoder = _get_choice(cfg, "decoder", {"map-exact", "stochastic"}, default="map-exact")
    sw = sw_codec.SwCodec(a, source, decoder=decoder)
    result = channel_codec.search_code(
        sw, ensembles.uniform_ensemble(field, l_b, n), channel,
        candidates=_get_int(cfg, "candidates", 8),
        trials=_get_int(cfg, "trials", 2000),
        seed=seed, threads=threads)
    header = ["channel", "p", "n", "lA", "lB", "r", "R", "candidate",
              "error", "std_err", "baseline_error", "delta_hat", "seed"]
    return header, result.rows()


def _run_decision(cfg: dict, seed: int, threads: int) -> Tuple[List[str], List[dict]]:
    count = _get_int(cfg, "problems", 1000)
    max_u = _get_int(cfg, "max_u", 4)
    max_v = _get_int(cfg, "max_v", 4)
    header = ["seed", "|U|", "|V|", "err_map", "err_posterior", "ratio"]
    rows = []
    rng = make_rng(seed)
    for _ in range(count):
        prob = decision_theory.random_problem(rng, max_u=max_u, max_v=max_v)
        rep = decision_theory.verify_factor2(prob)
        rows.append({"seed": seed, "|U|": prob.u_size, "|V|": prob.v_size,
                     "err_map": rep.err_map, "err_posterior": rep.err_posterior,
                     "ratio": rep.ratio})
    return header, rows


def _run_crng_test(cfg: dict, seed: int, threads: int) -> Tuple[List[str], List[dict]]:
    field = FieldSpec(_get_int(cfg, "q", 2))
    n, l = _get_int(cfg, "n"), _get_int(cfg, "l")
    p1 = _get_float(cfg, "bernoulli", 0.5)
    if field.q != 2:
        raise ConfigError("bernoulli", "single-parameter weights are binary only")
    weights = np.array([1.0 - p1, p1])
    a = ensembles.sample_map(ensembles.uniform_ensemble(field, l, n),
                             np.random.default_rng(sw_codec.derived_seed(seed, 7)))
    rng = make_rng(sw_codec.derived_seed(seed, 8))
    x = GfVector.from_array(field, rng.integers(0, field.q, size=n))
    c = matvec(a, x)
    constraints = crng_sampler.ConstraintSet(((a, c),))
    header = ["mode", "q", "n", "l", "coset_size", "draws", "tv", "seed"]
    rows = []
    exact_draws = _get_int(cfg, "draws", 100000)
    dist = crng_sampler.ConstrainedDistribution(weights, constraints, mode=crng_sampler.EXACT)
    tv = crng_sampler.tv_distance_check(dist, exact_draws, sw_codec.derived_seed(seed, 9))
    rows.append({"mode": "exact", "q": field.q, "n": n, "l": l,
                 "coset_size": constraints.coset_size, "draws": exact_draws,
                 "tv": tv, "seed": seed})
    mcmc_draws = _get_int(cfg, "mcmc_draws", 10000)
    dist_m = crng_sampler.ConstrainedDistribution(weights, constraints, mode=crng_sampler.MCMC)
    tv_m = crng_sampler.tv_distance_check(dist_m, mcmc_draws, sw_codec.derived_seed(seed, 10))
    rows.append({"mode": "mcmc", "q": field.q, "n": n, "l": l,
                 "coset_size": constraints.coset_size, "draws": mcmc_draws,
                 "tv": tv_m, "seed": seed})
    return header, rows


_RUNNERS = {
    "capacity": _run_capacity,
    "hash-verify": _run_hash_verify,
    "sw": _run_sw,
    "channel": _run_channel,
    "decision": _run_decision,
    "crng-test": _run_crng_test,
}


def run(experiment: str, cfg: dict, seed: Optional[int] = None,
        out: Optional[str] = None, threads: int = 1) -> str:
    """Execute one experiment and write its CSV; returns the output path."""
    if experiment not in _RUNNERS:
        raise ConfigError("experiment", f"unknown experiment {experiment!r}")
    master = seed if seed is not None else _get_int(cfg, "seed", 0)
    for warning in validate(experiment, cfg):
        print(f"warning: {warning}", file=sys.stderr)
    header, rows = _RUNNERS[experiment](cfg, master, threads)
    path = out or f"{experiment}.csv"
    write_csv(path, header, rows)
    return path


def write_csv(path: str, header: List[str], rows: List[dict]) -> None:
    with open(path, "w", newline="") as fh:
        # timestamp lives in a comment row, outside the determinism contract
        fh.write(f"# generated {datetime.datetime.now().isoformat()}\n")
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        for row in rows:
            writer.writerow([_format_cell(row.get(col, "")) for col in header])


def _format_cell(value) -> str:
    if isinstance(value, float):
        return repr(value)
    return str(value)


def result_rows(path: str) -> List[str]:
    """Non-comment lines of a result file (the deterministic part)."""
    with open(path) as fh:
        return [ln for ln in fh.read().splitlines() if not ln.startswith("#")]


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="cosetlab",
        description="coset-code laboratory experiment driver")
    sub = parser.add_subparsers(dest="experiment", required=True)
    for name in EXPERIMENTS:
        p = sub.add_parser(name, help=f"run the {name} experiment")
        p.add_argument("--config", required=True, help="flat key = value config file")
        p.add_argument("--seed", type=int, default=None,
                       help="master seed (overrides the config's seed key)")
        p.add_argument("--out", default=None, help="output CSV path")
        p.add_argument("--threads", type=int, default=1,
                       help="worker threads for independent candidates/trials")
    args = parser.parse_args(argv)
    try:
        cfg = parse_config(args.config)
        path = run(args.experiment, cfg, seed=args.seed, out=args.out, threads=args.threads)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except CapExceededError as exc:
        print(f"cap exceeded: {exc}", file=sys.stderr)
        return 2
    print(path)
    return 0


if __name__ == "__main__":
    sys.exit(main())
