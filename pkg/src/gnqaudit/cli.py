"""Single executable for the whole pipeline.

Subcommands: gen-data, train, audit, bound, attack, defend, oracle. Anything
structural lives in the JSON config; flags cover only paths, seed override,
thread cap, and the gradient dump toggle, so one config file is the full
provenance of a run. Every command writes its effective config back to the
output directory and exits 0 on success, 2 on config errors, 3 on capacity
errors, 4 on divergence, 5 on verification failure.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import sys
from pathlib import Path

import numpy as np

from ._version import __version__
from .attack import loss_attack, success_vs_gnq
from .bounds import (
    fano_error_bound,
    growth_condition_holds,
    kappa_regime_note,
    per_iteration_leakage,
    prior_entropy,
)
from .data import (
    Dataset,
    load_csv_dataset,
    make_blobs,
    make_linear_dataset,
    make_outlier_regression_dataset,
    save_csv_dataset,
)
from .defense import rank_examples, run_defense, run_defense_sweep
from .errors import AuditError, ConfigurationError, VerificationError
from .geometry import DEFAULT_TOL, GramMode
from .models import ModelSpec, gradient_all
from .oracle import run_oracle_checks
from .reports import (
    attack_report,
    audit_report,
    canonical_json,
    defense_report,
    finalize_report,
    oracle_report,
    write_attack_csv,
    write_gradients_csv,
    write_report,
    write_scores_csv,
    write_sweep_csv,
)
from .sampling import SamplingConfig, enumerate_exact_moments
from .training import AuditCadence, audit, load_trajectory, save_trajectory, train

_TOP_KEYS = {
    "sampling",
    "model",
    "dataset",
    "audit",
    "bound",
    "attack",
    "defense",
    "oracle",
    "output_dir",
}
_DATASET_KINDS = {
    "outlier_regression": {"kind"},
    "blobs": {"kind", "class_sizes", "input_dim", "center_distance", "spread", "seed"},
    "linear": {"kind", "n", "slope", "intercept", "noise_scale", "x_low", "x_high", "seed"},
    "csv": {"kind", "path", "target"},
}


def _reject_unknown(section: str, given: dict, allowed: set[str]) -> None:
    unknown = set(given) - allowed
    if unknown:
        raise ConfigurationError(
            f"unknown key(s) in {section}: {', '.join(sorted(unknown))}"
        )


@dataclasses.dataclass(frozen=True)
class AuditSettings:
    mode: GramMode = GramMode.FULL_EXACT
    cadence: AuditCadence = AuditCadence.EVERY_EPOCH
    tol: float = DEFAULT_TOL

    @classmethod
    def from_json_dict(cls, d: dict) -> "AuditSettings":
        _reject_unknown("audit", d, {"mode", "cadence", "tol"})
        try:
            mode = GramMode(d.get("mode", "full_exact"))
            cadence = AuditCadence(d.get("cadence", "every_epoch"))
        except ValueError as exc:
            raise ConfigurationError(str(exc)) from None
        tol = float(d.get("tol", DEFAULT_TOL))
        if not 0.0 < tol < 1.0:
            raise ConfigurationError(f"audit tol must be in (0, 1), got {tol}")
        return cls(mode=mode, cadence=cadence, tol=tol)


@dataclasses.dataclass(frozen=True)
class RunConfig:
    """Validated view of the JSON config; every present section parses eagerly."""

    raw: dict
    sampling: SamplingConfig | None
    model: ModelSpec | None
    dataset: dict | None
    audit: AuditSettings
    bound_gnq: tuple[float, ...]
    attack_bins: int
    defense_fractions: tuple[float, ...] | None
    oracle_seed: int
    oracle_corrupt: str | None
    output_dir: Path

    @classmethod
    def from_json_dict(cls, raw: dict, out_override: str | None, seed_override: int | None) -> "RunConfig":
        if not isinstance(raw, dict):
            raise ConfigurationError("config root must be a JSON object")
        _reject_unknown("config", raw, _TOP_KEYS)

        sampling = None
        if "sampling" in raw:
            d = dict(raw["sampling"])
            _reject_unknown(
                "sampling",
                d,
                {"n_total", "n_train", "batch_size", "n_iters", "learning_rate", "scheme", "seed"},
            )
            if seed_override is not None:
                d["seed"] = seed_override
            sampling = SamplingConfig.from_json_dict(d)

        model = None
        if "model" in raw:
            _reject_unknown(
                "model",
                raw["model"],
                {"kind", "input_dim", "hidden_dim", "n_classes", "init", "init_scale"},
            )
            model = ModelSpec.from_json_dict(raw["model"])

        dataset = None
        if "dataset" in raw:
            dataset = dict(raw["dataset"])
            kind = dataset.get("kind")
            if kind not in _DATASET_KINDS:
                raise ConfigurationError(
                    f"dataset kind must be one of {sorted(_DATASET_KINDS)}, got {kind!r}"
                )
            _reject_unknown(f"dataset[{kind}]", dataset, _DATASET_KINDS[kind])
            if seed_override is not None and "seed" in _DATASET_KINDS[kind]:
                dataset["seed"] = seed_override

        audit_settings = AuditSettings.from_json_dict(raw.get("audit", {}))

        bound_section = raw.get("bound", {})
        _reject_unknown("bound", bound_section, {"gnq"})
        bound_gnq = tuple(float(g) for g in bound_section.get("gnq", (0.1, 1.0, 10.0)))
        if any(g < 0 or not np.isfinite(g) for g in bound_gnq):
            raise ConfigurationError("bound.gnq values must be finite and >= 0")

        attack_section = raw.get("attack", {})
        _reject_unknown("attack", attack_section, {"n_bins"})
        attack_bins = int(attack_section.get("n_bins", 8))
        if attack_bins < 2:
            raise ConfigurationError(f"attack.n_bins must be >= 2, got {attack_bins}")

        defense_fractions = None
        if "defense" in raw:
            d = raw["defense"]
            _reject_unknown("defense", d, {"p", "sweep"})
            if ("p" in d) == ("sweep" in d):
                raise ConfigurationError("defense section needs exactly one of p, sweep")
            fracs = [d["p"]] if "p" in d else list(d["sweep"])
            defense_fractions = tuple(float(f) for f in fracs)
            if any(not 0.0 <= f < 1.0 for f in defense_fractions):
                raise ConfigurationError("defense fractions must lie in [0, 1)")

        oracle_section = raw.get("oracle", {})
        _reject_unknown("oracle", oracle_section, {"seed", "corrupt"})
        oracle_seed = int(oracle_section.get("seed", 0))
        oracle_corrupt = oracle_section.get("corrupt")

        out = Path(out_override if out_override is not None else raw.get("output_dir", "out"))
        return cls(
            raw=raw,
            sampling=sampling,
            model=model,
            dataset=dataset,
            audit=audit_settings,
            bound_gnq=bound_gnq,
            attack_bins=attack_bins,
            defense_fractions=defense_fractions,
            oracle_seed=oracle_seed,
            oracle_corrupt=oracle_corrupt,
            output_dir=out,
        )

    def effective(self) -> dict:
        """The config as actually run (overrides applied); hashed into reports."""
        out = dict(self.raw)
        if self.sampling is not None:
            out["sampling"] = self.sampling.to_json_dict()
        if self.dataset is not None:
            out["dataset"] = dict(self.dataset)
        out["output_dir"] = str(self.output_dir)
        return out

    def require(self, *sections: str) -> None:
        missing = [
            s
            for s in sections
            if getattr(self, "defense_fractions" if s == "defense" else s) is None
        ]
        if missing:
            raise ConfigurationError(
                f"this command needs config section(s): {', '.join(missing)}"
            )


def _load_run_config(args: argparse.Namespace) -> RunConfig:
    path = Path(args.config)
    if not path.exists():
        raise ConfigurationError(f"config file not found: {path}")
    try:
        raw = json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise ConfigurationError(f"config is not valid JSON: {exc}") from None
    return RunConfig.from_json_dict(raw, args.out, args.seed)


def _build_dataset(cfg: RunConfig) -> Dataset:
    cfg.require("dataset")
    desc = cfg.dataset
    kind = desc["kind"]
    if kind == "outlier_regression":
        return make_outlier_regression_dataset()
    if kind == "blobs":
        return make_blobs(
            class_sizes=[int(c) for c in desc["class_sizes"]],
            input_dim=int(desc.get("input_dim", 2)),
            center_distance=float(desc.get("center_distance", 2.0)),
            spread=float(desc.get("spread", 1.0)),
            seed=int(desc.get("seed", 0)),
        )
    if kind == "linear":
        return make_linear_dataset(
            n_examples=int(desc["n"]),
            slope=float(desc.get("slope", 1.0)),
            intercept=float(desc.get("intercept", 0.0)),
            noise_scale=float(desc.get("noise_scale", 0.1)),
            x_low=float(desc.get("x_low", 0.0)),
            x_high=float(desc.get("x_high", 1.0)),
            seed=int(desc.get("seed", 0)),
        )
    return load_csv_dataset(desc["path"], desc.get("target", "target"))


def _write_provenance(cfg: RunConfig) -> None:
    cfg.output_dir.mkdir(parents=True, exist_ok=True)
    (cfg.output_dir / "run_config.json").write_text(
        canonical_json(cfg.effective()), encoding="utf-8"
    )


def _obtain_trajectory(cfg: RunConfig, args: argparse.Namespace):
    """Load the checkpoint if --trajectory was given, else train from scratch."""
    data = _build_dataset(cfg)
    if getattr(args, "trajectory", None):
        traj = load_trajectory(args.trajectory)
        if cfg.sampling is not None and traj.cfg != cfg.sampling:
            raise ConfigurationError(
                "trajectory checkpoint was trained under a different sampling config"
            )
        return traj, data
    cfg.require("sampling", "model")
    return train(cfg.sampling, cfg.model, data), data


def cmd_gen_data(cfg: RunConfig, args: argparse.Namespace) -> None:
    ds = _build_dataset(cfg)
    _write_provenance(cfg)
    save_csv_dataset(cfg.output_dir / "dataset.csv", ds)
    print(f"wrote {len(ds)} rows to {cfg.output_dir / 'dataset.csv'}")


def cmd_train(cfg: RunConfig, args: argparse.Namespace) -> None:
    cfg.require("sampling", "model", "dataset")
    data = _build_dataset(cfg)
    traj = train(cfg.sampling, cfg.model, data)
    _write_provenance(cfg)
    save_trajectory(cfg.output_dir / "trajectory.json", traj)
    payload = {
        "n_iters": cfg.sampling.n_iters,
        "n_params": cfg.model.n_params,
        "final_params_norm": float(np.linalg.norm(traj.final_params)),
        "n_members": int(traj.train_indicator.sum()),
    }
    write_report(cfg.output_dir / "train_report.json", finalize_report("train", payload, cfg.effective()))
    print(f"trained {cfg.sampling.n_iters} iterations; checkpoint in {cfg.output_dir}")


def cmd_audit(cfg: RunConfig, args: argparse.Namespace) -> None:
    traj, data = _obtain_trajectory(cfg, args)
    record = audit(
        traj, data, mode=cfg.audit.mode, cadence=cfg.audit.cadence, tol=cfg.audit.tol
    )
    ranking = rank_examples(record)
    _write_provenance(cfg)
    write_report(
        cfg.output_dir / "audit_report.json", audit_report(record, cfg.effective(), ranking)
    )
    write_scores_csv(cfg.output_dir / "scores.csv", record)
    if args.dump_gradients:
        mats = {
            it: gradient_all(traj.model, traj.params_per_iter[it], data.features, data.targets)
            for it in record.audited_iterations
        }
        write_gradients_csv(cfg.output_dir / "gradients.csv", mats)
    n_flags = len(record.range_violations)
    print(
        f"audited {len(record.audited_iterations)} iterations of {record.n_examples} "
        f"examples; {n_flags} range flags; report in {cfg.output_dir}"
    )


def cmd_bound(cfg: RunConfig, args: argparse.Namespace) -> None:
    cfg.require("sampling")
    s = cfg.sampling
    prior = prior_entropy(s.n_train, s.n_total)
    rows = []
    for g in cfg.bound_gnq:
        bits = per_iteration_leakage(g, s)
        fano = fano_error_bound(prior, bits)
        rows.append(
            {
                "gnq": g,
                "per_iteration_bits": bits,
                "pe_lower_single_iteration": fano.pe_lower,
                "vacuous": fano.vacuous,
            }
        )
    payload = {
        "prior_entropy_bits": prior,
        "monotone_growth_condition": growth_condition_holds(s),
        "variance_ratio_regime": kappa_regime_note(s),
        "per_gnq": rows,
    }
    _write_provenance(cfg)
    write_report(cfg.output_dir / "bound_report.json", finalize_report("bound", payload, cfg.effective()))
    print(f"bounded {len(rows)} GNQ values; report in {cfg.output_dir}")


def cmd_attack(cfg: RunConfig, args: argparse.Namespace) -> None:
    traj, data = _obtain_trajectory(cfg, args)
    record = audit(
        traj, data, mode=cfg.audit.mode, cadence=cfg.audit.cadence, tol=cfg.audit.tol
    )
    attacked = loss_attack(
        traj.model, traj.final_params, data.with_membership(traj.train_indicator)
    )
    curve = success_vs_gnq(attacked, record, n_bins=cfg.attack_bins)
    _write_provenance(cfg)
    write_report(
        cfg.output_dir / "attack_report.json",
        attack_report(attacked, cfg.effective(), curve),
    )
    write_attack_csv(cfg.output_dir / "attack.csv", attacked)
    print(f"attack AUC {attacked.auc:.4f}; report in {cfg.output_dir}")


def cmd_defend(cfg: RunConfig, args: argparse.Namespace) -> None:
    cfg.require("sampling", "model", "dataset", "defense")
    data = _build_dataset(cfg)
    reports = run_defense_sweep(
        cfg.sampling,
        cfg.model,
        data,
        list(cfg.defense_fractions),
        audit_mode=cfg.audit.mode,
        cadence=cfg.audit.cadence,
        tol=cfg.audit.tol,
    )
    _write_provenance(cfg)
    if len(reports) == 1:
        write_report(
            cfg.output_dir / "defense_report.json",
            defense_report(reports[0], cfg.effective()),
        )
    else:
        payload = {"sweep": [defense_report(r, cfg.effective()) for r in reports]}
        write_report(
            cfg.output_dir / "defense_report.json",
            finalize_report("defense", payload, cfg.effective()),
        )
    write_sweep_csv(cfg.output_dir / "sweep.csv", reports)
    moved = ", ".join(f"{r.auc_before:.3f}->{r.auc_after:.3f}" for r in reports)
    print(f"defense AUC {moved}; report in {cfg.output_dir}")


def cmd_oracle(cfg: RunConfig, args: argparse.Namespace) -> None:
    corrupt = args.corrupt if args.corrupt is not None else cfg.oracle_corrupt
    report = run_oracle_checks(seed=cfg.oracle_seed, corrupt=corrupt)
    extra_note = ""
    if cfg.sampling is not None:
        # An explicit sampling section asks for that instance to be enumerated
        # too; capacity limits apply and surface as exit code 3.
        enumerate_exact_moments(cfg.sampling, 0)
        extra_note = f" (instance N={cfg.sampling.n_total} enumerated)"
    _write_provenance(cfg)
    write_report(
        cfg.output_dir / "oracle_report.json", oracle_report(report, cfg.effective())
    )
    if not report.passed:
        raise VerificationError(
            "formula checks failed: " + ", ".join(report.failures)
        )
    print(f"all {len(report.checks)} formula checks passed{extra_note}")


_HANDLERS = {
    "gen-data": cmd_gen_data,
    "train": cmd_train,
    "audit": cmd_audit,
    "bound": cmd_bound,
    "attack": cmd_attack,
    "defend": cmd_defend,
    "oracle": cmd_oracle,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="gnqaudit",
        description="Gradient-uniqueness privacy auditing for mini-batch SGD.",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)
    for name, help_text in (
        ("gen-data", "write a synthetic dataset CSV"),
        ("train", "run SGD and checkpoint the trajectory"),
        ("audit", "score per-example gradient uniqueness along a trajectory"),
        ("bound", "evaluate leakage and error bounds for a sampling config"),
        ("attack", "run the loss-threshold membership attack"),
        ("defend", "rank, remove, retrain, and compare attack metrics"),
        ("oracle", "verify the closed forms against brute-force enumeration"),
    ):
        p = sub.add_parser(name, help=help_text)
        p.add_argument("--config", required=True, help="JSON run configuration")
        p.add_argument("--seed", type=int, default=None, help="override the config seed")
        p.add_argument("--out", default=None, help="override the config output_dir")
        p.add_argument(
            "--threads",
            type=int,
            default=None,
            help="cap numeric worker threads (results are identical at any cap)",
        )
        if name in ("audit", "attack"):
            p.add_argument(
                "--trajectory", default=None, help="reuse a trajectory checkpoint"
            )
        if name == "audit":
            p.add_argument(
                "--dump-gradients",
                action="store_true",
                help="also write per-example gradient rows for audited iterations",
            )
        if name == "oracle":
            p.add_argument(
                "--corrupt",
                default=None,
                help="deliberately corrupt a named constant (self-test that checks fail)",
            )
    return parser


def _apply_thread_cap(threads: int | None) -> None:
    if threads is None:
        return
    if threads < 1:
        raise ConfigurationError(f"--threads must be >= 1, got {threads}")
    try:
        # BLAS pools are already live by import time; threadpoolctl can still
        # cap them. Purely a resource knob, never changes results.
        import threadpoolctl

        threadpoolctl.threadpool_limits(limits=threads)
    except ImportError:
        pass


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        _apply_thread_cap(args.threads)
        cfg = _load_run_config(args)
        _HANDLERS[args.command](cfg, args)
    except AuditError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.exit_code
    return 0


if __name__ == "__main__":
    sys.exit(main())
