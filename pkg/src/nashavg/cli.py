"""Command-line front end: read data, run one analysis, write a JSON report.

Exit codes: 0 success, 1 unreadable or malformed input, 2 solver did not
converge (the report still carries diagnostics), 3 invalid flags.
"""

from __future__ import annotations

import argparse
import csv
import sys
import warnings
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .data_io import (
    DataError,
    EvaluationReport,
    center_scores,
    fmt,
    is_match_file,
    matches_to_counts,
    matrix_digest,
    parse_matches,
    parse_prob_matrix,
    parse_score_matrix,
    serialize_report,
    standardize_scores,
)
from .hodge import (
    ELO_ALPHA,
    avt_averages,
    avt_curl_criterion,
    avt_residual,
    embed_avt,
    grad,
    hodge_decompose,
    logit_matrix,
    max_abs_curl,
    rot,
    schur_antisym,
    sigmoid_matrix,
)
from .nash import SolverError, interpretability_report, maxent_nash_avt, maxent_nash_ava
from .ratings import ConvergenceError, elo_fit_batch, empirical_probs, melo_fit_batch, prediction_metrics

SUBCOMMANDS = ("elo", "melo", "hodge", "nash-ava", "nash-avt", "schur")
MELO_FLAGS = ("k", "lr_r", "lr_c", "epochs", "seed")
EXIT_OK, EXIT_INPUT, EXIT_SOLVER, EXIT_FLAGS = 0, 1, 2, 3


class FlagError(Exception):
    pass


@dataclass
class RunConfig:
    subcommand: str
    input: Path
    output: Path | None = None
    clamp_eps: float = 0.01
    tol: float = 1e-8
    max_iter: int = 200
    k: int = 1
    lr_r: float = 16.0
    lr_c: float = 1.0
    epochs: int = 2000
    seed: int = 0
    standardize: bool = False
    center: bool = False
    avt: bool = False
    emit_plots: bool = False
    explicit: frozenset = field(default_factory=frozenset)

    def validate(self) -> None:
        if self.subcommand not in SUBCOMMANDS:
            raise FlagError(f"unknown subcommand {self.subcommand!r}")
        if not self.tol > 0:
            raise FlagError("--tol must be positive")
        if not 0 < self.clamp_eps < 0.5:
            raise FlagError("--clamp-eps must lie in (0, 0.5)")
        if self.k < 0:
            raise FlagError("--k must be nonnegative")
        if self.max_iter < 1 or self.epochs < 1:
            raise FlagError("--max-iter and --epochs must be at least 1")
        if not (self.lr_r > 0 and self.lr_c > 0):
            raise FlagError("learning rates must be positive")
        if self.subcommand != "melo":
            stray = [f for f in MELO_FLAGS if f in self.explicit]
            if stray:
                names = ", ".join("--" + f.replace("_", "-") for f in stray)
                raise FlagError(f"{names} apply only to 'melo'")
        if "max_iter" in self.explicit and self.subcommand not in ("elo", "melo"):
            raise FlagError("--max-iter only applies to 'elo' and 'melo'")
        if self.avt and self.subcommand not in ("hodge", "schur"):
            raise FlagError("--avt only applies to 'hodge' and 'schur'")
        scores = self.subcommand == "nash-avt" or self.avt
        if self.standardize and not scores:
            raise FlagError("--standardize needs score input (nash-avt, or hodge/schur with --avt)")
        if self.center and not (self.avt and self.subcommand in ("hodge", "schur")):
            raise FlagError("--center only applies to hodge/schur analyses with --avt")
        if self.emit_plots:
            if self.subcommand not in ("nash-ava", "nash-avt"):
                raise FlagError("--emit-plots needs a Nash block; use nash-ava or nash-avt")
            if self.output is None:
                raise FlagError("--emit-plots needs --output to locate the CSV files")


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_FLAGS, f"{self.prog}: error: {message}\n")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="nashavg", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="subcommand", required=True, parser_class=_Parser)
    for name in SUBCOMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--input", required=True, type=Path)
        p.add_argument("--output", type=Path, help="report path (default: standard output)")
        p.add_argument("--clamp-eps", type=float, default=0.01)
        p.add_argument("--tol", type=float, default=1e-8)
        p.add_argument("--max-iter", type=int)
        p.add_argument("--k", type=int)
        p.add_argument("--lr-r", type=float)
        p.add_argument("--lr-c", type=float)
        p.add_argument("--epochs", type=int)
        p.add_argument("--seed", type=int)
        p.add_argument("--standardize", action="store_true")
        p.add_argument("--center", action="store_true")
        p.add_argument("--emit-plots", action="store_true")
        if name in ("hodge", "schur"):
            p.add_argument("--avt", action="store_true", help="treat input as an agent x task score matrix")
    return parser


def config_from_args(args: argparse.Namespace) -> RunConfig:
    values = {k: v for k, v in vars(args).items() if v is not None}
    explicit = frozenset(k for k in ("max_iter", *MELO_FLAGS) if k in values)
    values.setdefault("avt", False)
    return RunConfig(explicit=explicit, **values)


# ---------------------------------------------------------------------------
# input


def _load_ava(cfg: RunConfig):
    text = cfg.input.read_text(encoding="utf-8")
    if is_match_file(text):
        counts = matches_to_counts(parse_matches(text))
        if counts.wins.shape[0] == 0:
            raise DataError("match file has no records")
        return empirical_probs(counts), "matches"
    return parse_prob_matrix(text), "probs"


def _load_scores(cfg: RunConfig, diagnostics: dict):
    s = parse_score_matrix(cfg.input.read_text(encoding="utf-8"))
    diagnostics["input_digest"] = matrix_digest(s.scores)
    if cfg.standardize:
        with warnings.catch_warnings(record=True) as caught:
            warnings.simplefilter("always")
            s = standardize_scores(s)
        diagnostics["warnings"].extend(str(w.message) for w in caught)
    if cfg.center:
        s = center_scores(s)
    return s


# ---------------------------------------------------------------------------
# analyses; each fills sections of ``out`` in place so partial results survive


def _elo_block(pb, cfg: RunConfig, diagnostics: dict) -> dict:
    state = elo_fit_batch(pb, tol=cfg.tol, max_iter=cfg.max_iter)
    r = state.ratings
    phat = sigmoid_matrix(grad(r.values))
    return {
        "ratings": r.values,
        "ratings_display": r.display(),
        "metrics": prediction_metrics(pb, phat),
        "predicted": phat,
    }


def _run_elo(cfg, out, diagnostics):
    pbar, kind = _load_ava(cfg)
    out["labels"] = list(pbar.labels)
    diagnostics.update(input_format=kind, input_digest=matrix_digest(pbar.probs))
    out["elo"] = _elo_block(pbar.clamped(cfg.clamp_eps), cfg, diagnostics)


def _run_melo(cfg, out, diagnostics):
    pbar, kind = _load_ava(cfg)
    out["labels"] = list(pbar.labels)
    diagnostics.update(input_format=kind, input_digest=matrix_digest(pbar.probs))
    pb = pbar.clamped(cfg.clamp_eps)
    model = melo_fit_batch(pb, k=cfg.k, lr_r=cfg.lr_r, lr_c=cfg.lr_c, epochs=cfg.epochs, seed=cfg.seed)
    phat = model.predict_matrix()
    out["melo"] = {
        "k": model.k,
        "ratings": model.ratings.values,
        "ratings_display": model.ratings.display(),
        "cyclic_features": model.cyclic_features,
        "metrics": prediction_metrics(pb, phat),
        "predicted": phat,
    }
    out["elo"] = _elo_block(pb, cfg, diagnostics)


def _ava_logits(cfg, out, diagnostics):
    pbar, kind = _load_ava(cfg)
    out["labels"] = list(pbar.labels)
    diagnostics.update(input_format=kind, input_digest=matrix_digest(pbar.probs))
    return logit_matrix(pbar.probs, clamp_eps=cfg.clamp_eps, labels=pbar.labels).entries


def _scores_labels(s) -> dict:
    return {"agents": list(s.agent_labels), "tasks": list(s.task_labels)}


def _run_hodge(cfg, out, diagnostics):
    if cfg.avt:
        out["mode"] = "avt"
        s = _load_scores(cfg, diagnostics)
        out["labels"] = _scores_labels(s)
        skill, difficulty = avt_averages(s.scores)
        resid = avt_residual(s.scores)
        out["hodge"] = {
            "skill": skill,
            "difficulty": difficulty,
            "residual": resid,
            "residual_norm": float(np.linalg.norm(resid)),
            "curl_free": avt_curl_criterion(s.scores, tol=cfg.tol),
        }
        return
    a = _ava_logits(cfg, out, diagnostics)
    parts = hodge_decompose(a)
    flags = interpretability_report(a, tol=cfg.tol)
    out["hodge"] = {
        "ratings": parts.ratings.values,
        "ratings_display": parts.ratings.display(),
        "transitive": parts.transitive,
        "cyclic": parts.cyclic,
        "transitive_norm": float(np.linalg.norm(parts.transitive)),
        "cyclic_norm": float(np.linalg.norm(parts.cyclic)),
        "max_abs_curl": max_abs_curl(a),
        "is_cyclic": flags["cyclic"],
        "is_transitive": flags["transitive"],
    }


def _run_schur(cfg, out, diagnostics):
    if cfg.avt:
        out["mode"] = "avt"
        s = _load_scores(cfg, diagnostics)
        out["labels"] = _scores_labels(s)
        target = embed_avt(s.scores, mode="hodge")
        base = {"skill": avt_averages(s.scores)[0], "difficulty": avt_averages(s.scores)[1]}
    else:
        a = _ava_logits(cfg, out, diagnostics)
        parts = hodge_decompose(a)
        target = rot(a)
        base = {"ratings": parts.ratings.values, "ratings_display": parts.ratings.display()}
    f = schur_antisym(target)
    out["hodge"] = {**base, "schur_pairs": f.pairs, "schur_basis": f.basis, "schur_rank": 2 * len(f.pairs)}


def _run_nash_ava(cfg, out, diagnostics):
    a = _ava_logits(cfg, out, diagnostics)
    res = maxent_nash_ava(a, tol=cfg.tol)
    diagnostics["solver"] = res.diagnostics
    labels = out["labels"]
    out["nash"] = {
        "distribution": res.distribution,
        "nash_average": res.nash_average,
        "uniform_average": a.mean(axis=1),
        "entropy": res.entropy,
        "exploitability": res.exploitability,
        "support": [labels[i] for i in res.support],
    }


def _run_nash_avt(cfg, out, diagnostics):
    out["mode"] = "avt"
    s = _load_scores(cfg, diagnostics)
    out["labels"] = _scores_labels(s)
    res = maxent_nash_avt(s.scores, tol=cfg.tol)
    diagnostics["solver"] = res.diagnostics
    skill, difficulty = avt_averages(s.scores)
    out["nash"] = {
        "agent_distribution": res.agent_distribution,
        "task_distribution": res.task_distribution,
        "value": res.value,
        "agent_nash_avg": res.agent_nash_avg,
        "task_nash_avg": res.task_nash_avg,
        "agent_uniform_avg": skill,
        "task_uniform_avg": difficulty,
        "agent_support": [s.agent_labels[i] for i in res.agent_support],
        "task_support": [s.task_labels[j] for j in res.task_support],
        "exploitability": res.exploitability,
    }


_RUNNERS = {
    "elo": _run_elo,
    "melo": _run_melo,
    "hodge": _run_hodge,
    "schur": _run_schur,
    "nash-ava": _run_nash_ava,
    "nash-avt": _run_nash_avt,
}


def _config_summary(cfg: RunConfig) -> dict:
    out = {"subcommand": cfg.subcommand, "clamp_eps": cfg.clamp_eps, "tol": cfg.tol}
    if cfg.subcommand in ("elo", "melo"):
        out["max_iter"] = cfg.max_iter
    if cfg.subcommand == "melo":
        out.update(k=cfg.k, lr_r=cfg.lr_r, lr_c=cfg.lr_c, epochs=cfg.epochs, seed=cfg.seed)
    out.update(standardize=cfg.standardize, center=cfg.center, avt=cfg.avt)
    out["elo_scale"] = ELO_ALPHA
    return out


def _write(text: str, path: Path | None) -> None:
    if path is None:
        sys.stdout.write(text)
    else:
        path.parent.mkdir(parents=True, exist_ok=True)
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)


def emit_plot_data(report: EvaluationReport, directory: Path) -> list[Path]:
    """Write ``nash_distribution.csv`` and ``averages_comparison.csv``.

    Rows are sorted by Nash average, largest first.  AvT reports carry a
    leading ``group`` column (``agent`` or ``task``).
    """
    if not report.nash:
        raise ValueError("report has no Nash results")
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    nash = report.nash
    if report.mode == "ava":
        groups = [("", report.labels, nash["distribution"], nash["uniform_average"], nash["nash_average"])]
    else:
        groups = [
            ("agent", report.labels["agents"], nash["agent_distribution"], nash["agent_uniform_avg"], nash["agent_nash_avg"]),
            ("task", report.labels["tasks"], nash["task_distribution"], nash["task_uniform_avg"], nash["task_nash_avg"]),
        ]
    prefix = [] if report.mode == "ava" else ["group"]
    dist_path = directory / "nash_distribution.csv"
    avg_path = directory / "averages_comparison.csv"
    with open(dist_path, "w", encoding="utf-8", newline="") as fd, open(avg_path, "w", encoding="utf-8", newline="") as fa:
        wd = csv.writer(fd, lineterminator="\n")
        wa = csv.writer(fa, lineterminator="\n")
        wd.writerow([*prefix, "label", "probability"])
        wa.writerow([*prefix, "label", "uniform_avg", "nash_avg"])
        for group, labels, dist, uniform, navg in groups:
            head = [group] if prefix else []
            order = sorted(range(len(labels)), key=lambda i: -float(navg[i]))
            for i in order:
                wd.writerow([*head, labels[i], fmt(dist[i])])
                wa.writerow([*head, labels[i], fmt(uniform[i]), fmt(navg[i])])
    return [dist_path, avg_path]


def run(cfg: RunConfig) -> int:
    try:
        cfg.validate()
    except FlagError as exc:
        print(f"nashavg: {exc}", file=sys.stderr)
        return EXIT_FLAGS
    diagnostics = {"config": _config_summary(cfg), "warnings": []}
    out = {"mode": "ava", "labels": [], "elo": {}, "melo": {}, "hodge": {}, "nash": {}}
    code = EXIT_OK
    try:
        _RUNNERS[cfg.subcommand](cfg, out, diagnostics)
    except (OSError, DataError, UnicodeDecodeError) as exc:
        print(f"nashavg: cannot read {cfg.input}: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except ValueError as exc:
        # structurally valid files whose contents the analysis cannot accept
        print(f"nashavg: invalid input {cfg.input}: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except ConvergenceError as exc:
        diagnostics["error"] = {"message": str(exc), "residual": exc.residual, "iterations": exc.iterations}
        code = EXIT_SOLVER
    except SolverError as exc:
        diagnostics["error"] = {"message": str(exc), "solver": exc.diagnostics}
        code = EXIT_SOLVER
    if code == EXIT_SOLVER:
        print(f"nashavg: {diagnostics['error']['message']}", file=sys.stderr)
        out["nash"] = {}
    report = EvaluationReport(diagnostics=diagnostics, **out)
    _write(serialize_report(report), cfg.output)
    if cfg.emit_plots and code == EXIT_OK:
        emit_plot_data(report, cfg.output.parent)
    return code


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    return run(config_from_args(args))


if __name__ == "__main__":
    sys.exit(main())
