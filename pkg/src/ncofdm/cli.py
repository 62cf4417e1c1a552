"""Command-line experiment runner.

    ncofdm <psd|ber|sinr|equivalence|complexity|continuity> --config FILE
           [--seed N] [--out DIR] [--full-scale | --paper-scale]

The scenario file is a flat JSON object. System keys are ``K``, ``N``,
``N_cp``, ``V`` (an integer or a list of orders), ``modulation``,
``subcarriers`` and ``delta_f``; study keys are ``seed``, ``symbols``,
``ebno_db``, ``f_d``, ``fading`` and ``include_fd``.

Every CSV starts with ``#`` lines carrying the build description, the
scenario echo and the seed; bodies are byte-identical for a fixed scenario.

Exit codes: 0 success, 1 usage error, 2 invalid scenario, 3 runtime or
output failure.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import subprocess
import sys
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

import numpy as np

from . import experiments as ex
from .config import ConfigError, SystemConfig, config_from_mapping, load_config_file

log = logging.getLogger("ncofdm")

EXIT_OK, EXIT_USAGE, EXIT_CONFIG, EXIT_RUNTIME = 0, 1, 2, 3

KINDS = ("psd", "ber", "sinr", "equivalence", "complexity", "continuity")
SYSTEM_KEYS = {"K", "N", "N_cp", "V", "modulation", "subcarriers", "delta_f"}
STUDY_KEYS = {"seed", "symbols", "ebno_db", "f_d", "fading", "include_fd"}

DESK_SYMBOLS = 10_000
FULL_SYMBOLS = 100_000
DEFAULT_SYMBOLS = {"equivalence": 1000, "continuity": 1000}
DEFAULT_EBNO = {"ber": [0, 5, 10, 15, 20, 25, 30], "sinr": [0, 5, 10, 15, 20, 25, 30, 40]}


class UsageError(Exception):
    pass


@dataclass
class Scenario:
    kind: str
    cfg: SystemConfig
    V_set: list[int]
    symbols: int
    seed: int
    out: Path
    options: dict[str, Any] = field(default_factory=dict)

    def echo(self) -> dict:
        return {"kind": self.kind, **self.cfg.to_dict(), "V_set": self.V_set,
                "symbols": self.symbols, "seed": self.seed, **self.options}


def build_scenario(kind: str, data: dict, seed: int | None, out: Path, full_scale: bool) -> Scenario:
    unknown = set(data) - SYSTEM_KEYS - STUDY_KEYS
    if unknown:
        raise ConfigError(f"unknown scenario keys {sorted(unknown)}")
    cfg = config_from_mapping(data)
    V = data.get("V", 2)
    V_set = sorted({int(v) for v in V}) if isinstance(V, list) else [int(V)]
    if not V_set or min(V_set) < 0:
        raise ConfigError("V must list at least one non-negative order")
    for v in V_set:
        cfg.with_V(v)  # validates each order against K

    if seed is None:
        seed = data.get("seed", 0)
    if not isinstance(seed, int) or isinstance(seed, bool) or not 0 <= seed < 2 ** 64:
        raise ConfigError(f"seed must be an unsigned 64-bit integer, got {seed!r}")

    if full_scale and kind in ("psd", "ber", "sinr"):
        symbols = FULL_SYMBOLS
    else:
        symbols = data.get("symbols", DEFAULT_SYMBOLS.get(kind, DESK_SYMBOLS))
    if not isinstance(symbols, int) or isinstance(symbols, bool) or symbols <= 0:
        raise ConfigError(f"symbol budget must be a positive integer, got {symbols!r}")
    if kind == "psd" and symbols * cfg.frame_len < 2048:
        raise ConfigError("symbol budget too small for one 2048-sample Welch segment")

    options: dict[str, Any] = {}
    if kind in ("ber", "sinr"):
        ebno = data.get("ebno_db", DEFAULT_EBNO[kind])
        if not isinstance(ebno, list) or not ebno:
            raise ConfigError("ebno_db must be a non-empty list")
        try:
            options["ebno_db"] = [float(e) for e in ebno]
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"ebno_db entries must be numbers: {exc}") from exc
        options["f_d"] = float(data.get("f_d", 222.0))
        if kind == "ber":
            options["fading"] = bool(data.get("fading", True))
    if kind in ("psd", "ber"):
        options["include_fd"] = bool(data.get("include_fd", True))
    return Scenario(kind, cfg, V_set, symbols, seed, out, options)


# ---------------------------------------------------------------------------
# artifact writing


def build_description() -> str:
    here = Path(__file__).resolve().parent
    try:
        res = subprocess.run(["git", "describe", "--always", "--dirty", "--tags"], cwd=here,
                             capture_output=True, text=True, timeout=5)
        if res.returncode == 0 and res.stdout.strip():
            return res.stdout.strip()
    except (OSError, subprocess.SubprocessError):
        pass
    return "unknown"


def _fmt(v):
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    if isinstance(v, np.integer):
        return int(v)
    return v


class ArtifactWriter:
    def __init__(self, scenario: Scenario):
        self.scenario = scenario
        self.header = [
            f"# ncofdm build: {build_description()}",
            f"# scenario: {json.dumps(scenario.echo(), sort_keys=True)}",
            f"# seed: {scenario.seed}",
        ]
        self.files: list[str] = []

    def prepare(self) -> None:
        out = self.scenario.out
        out.mkdir(parents=True, exist_ok=True)
        probe = out / ".ncofdm-write-test"
        probe.write_text("")
        probe.unlink()

    def csv(self, name: str, columns: list[str], rows) -> None:
        path = self.scenario.out / name
        with path.open("w", newline="") as fh:
            for line in self.header:
                fh.write(line + "\n")
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(columns)
            for row in rows:
                w.writerow([_fmt(row[c]) for c in columns])
        self.files.append(name)

    def summary(self, metrics: dict) -> None:
        doc = {"build": self.header[0].split(": ", 1)[1], "scenario": self.scenario.echo(),
               "seed": self.scenario.seed, "files": self.files, "metrics": metrics}
        path = self.scenario.out / "summary.json"
        path.write_text(json.dumps(doc, indent=2, sort_keys=True, default=_json_default) + "\n")


def _json_default(o):
    if isinstance(o, np.generic):
        return o.item()
    if isinstance(o, np.ndarray):
        return o.tolist()
    raise TypeError(f"not serializable: {type(o).__name__}")


# ---------------------------------------------------------------------------
# subcommands


def _run_psd(sc: Scenario, w: ArtifactWriter) -> dict:
    st = ex.run_psd(sc.cfg, sc.V_set, sc.symbols, sc.seed, include_fd=sc.options["include_fd"])
    for label, est in st.measured.items():
        w.csv(f"psd_{label}.csv", ["freq_hz", "psd_db"],
              ({"freq_hz": f, "psd_db": p} for f, p in zip(est.freqs, est.psd_db)))
    for label, est in st.analytic.items():
        w.csv(f"psd_model_{label}.csv", ["freq_hz", "psd_db"],
              ({"freq_hz": f, "psd_db": p} for f, p in zip(est.freqs, est.psd_db)))
    cols = ["label", "exponent", "stderr", "points", "bound", "f_lo", "f_hi", "near_stronger_bound"]
    w.csv("decay.csv", cols, ({"label": k, **v} for k, v in st.decay.items()))
    return {"offset_hz": st.offset_hz, "gap_db": st.gaps, "decay": st.decay, **st.meta}


def _run_ber(sc: Scenario, w: ArtifactWriter) -> dict:
    o = sc.options
    st = ex.run_ber(sc.cfg, sc.V_set, o["ebno_db"], sc.symbols, sc.seed, f_d=o["f_d"],
                    fading=o["fading"], include_fd=o["include_fd"])
    w.csv("ber.csv", ["scheme", "ebno_db", "ber", "trials", "errors", "ci_low", "ci_high"], st.rows())
    order = ["plain"] + [f"td_V{V}" for V in sc.V_set]
    return {"channel": st.channel, "ordering_violations": st.ordering_violations(order),
            "fd_td_bit_mismatch": {str(k): v for k, v in st.fd_td_bit_mismatch.items()}, **st.meta}


def _run_sinr(sc: Scenario, w: ArtifactWriter) -> dict:
    o = sc.options
    st = ex.run_sinr(sc.cfg, sc.V_set, o["ebno_db"], sc.symbols, sc.seed, f_d=o["f_d"])
    rows = st.rows()
    w.csv("sinr.csv", ["ebno_db", "sinr_meas_db", "sinr_theory_db", "V"], rows)
    dev = max(abs(r["sinr_meas_db"] - r["sinr_theory_db"]) for r in rows)
    meta = dict(st.meta)
    meta["smooth_energy"] = {str(k): v for k, v in meta["smooth_energy"].items()}
    return {"channel_gain": st.channel_gain, "max_abs_deviation_db": dev, **meta}


def _run_equivalence(sc: Scenario, w: ArtifactWriter) -> dict:
    rows = [ex.run_equivalence(sc.cfg.with_V(V), sc.symbols, sc.seed) for V in sc.V_set]
    w.csv("equivalence.csv", ["K", "N", "N_cp", "V", "symbols", "max_abs_dev", "max_rel_dev"], rows)
    return {"max_rel_dev": max(r["max_rel_dev"] for r in rows)}


def _run_complexity(sc: Scenario, w: ArtifactWriter) -> dict:
    res = ex.run_complexity(sc.cfg.K, sc.cfg.N, sc.V_set)
    w.csv("complexity.csv", ["scheme", "K", "N", "V", "mults", "adds", "ratio"], res["rows"])
    return {"discrepancies": res["discrepancies"]}


def _run_continuity(sc: Scenario, w: ArtifactWriter) -> dict:
    worst = {}
    for V in sc.V_set:
        r = ex.run_continuity(sc.cfg.with_V(V), sc.symbols, sc.seed)
        cols = [f"residual_v{v}" for v in range(V + 1)]
        rows = ({"junction": i + 1, **dict(zip(cols, row))} for i, row in enumerate(r.relative))
        w.csv(f"continuity_V{V}.csv", ["junction"] + cols, rows)
        worst[str(V)] = r.worst.tolist()
    return {"worst_relative_residual": worst}


RUNNERS = {
    "psd": _run_psd, "ber": _run_ber, "sinr": _run_sinr,
    "equivalence": _run_equivalence, "complexity": _run_complexity, "continuity": _run_continuity,
}


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def make_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="ncofdm", description="N-continuous OFDM experiment runner")
    p.add_argument("kind", metavar="subcommand", help="one of: " + ", ".join(KINDS))
    p.add_argument("--config", required=True, type=Path, help="flat JSON scenario file")
    p.add_argument("--seed", type=int, default=None, help="overrides the scenario seed")
    p.add_argument("--out", type=Path, default=Path("ncofdm-out"), help="output directory")
    p.add_argument("--full-scale", "--paper-scale", dest="full_scale", action="store_true",
                   help="1e5-symbol budget for psd, ber and sinr")
    p.add_argument("-v", "--verbose", action="store_true")
    return p


def main(argv: list[str] | None = None) -> int:
    parser = make_parser()
    try:
        args = parser.parse_args(argv)
        if args.kind not in KINDS:
            raise UsageError(f"unknown subcommand {args.kind!r}; expected one of {', '.join(KINDS)}")
    except UsageError as exc:
        parser.print_usage(sys.stderr)
        print(f"ncofdm: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")

    try:
        sc = build_scenario(args.kind, load_config_file(args.config), args.seed, args.out, args.full_scale)
    except ConfigError as exc:
        print(f"ncofdm: invalid scenario: {exc}", file=sys.stderr)
        return EXIT_CONFIG

    return run(sc)


def run(sc: Scenario) -> int:
    """Execute one scenario and write its artifacts; returns the exit status."""
    writer = ArtifactWriter(sc)
    try:
        writer.prepare()
    except OSError as exc:
        print(f"ncofdm: cannot write to {sc.out}: {exc}", file=sys.stderr)
        return EXIT_RUNTIME

    log.info("running %s with %d symbols, seed %d", sc.kind, sc.symbols, sc.seed)
    try:
        metrics = RUNNERS[sc.kind](sc, writer)
        writer.summary(metrics)
    except (OSError, ValueError, np.linalg.LinAlgError, MemoryError) as exc:
        print(f"ncofdm: {sc.kind} failed: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    log.info("wrote %s", ", ".join(writer.files))
    return EXIT_OK

if __name__ == "__main__":
    sys.exit(main())
