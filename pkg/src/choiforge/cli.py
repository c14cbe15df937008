"""
Command-line interface for choiforge.
Generates, certifies and validates positive maps and runs experiment
campaigns. Exit codes: 0 success, 1 input error, 2 training exhausted,
3 solver failure.
"""

import argparse
import json
import logging
import sys
from datetime import datetime, timezone
from pathlib import Path
from typing import Any, Dict, List, Optional

import numpy as np

from choiforge import __version__
from choiforge.campaigns.export import export_plot_data, load_campaign_records
from choiforge.campaigns.presets import preset, preset_names
from choiforge.campaigns.runner import CampaignSummary, real_map_campaign, run_campaign
from choiforge.campaigns.spec import CampaignKind, CampaignSpec, load_campaign_spec
from choiforge.campaigns.validation import validate_found_map
from choiforge.choi.choi_matrix import compose_choi
from choiforge.choi.family import FamilyParams, family_choi
from choiforge.choi.io import load_choi, load_mask, save_choi
from choiforge.choi.masks import resolve_mask
from choiforge.choi.params import TpMode
from choiforge.choi.probe import block_positivity_probe
from choiforge.config.config_manager import ConfigManager, ConfigSchema, Environment
from choiforge.config.logging_setup import setup_logging
from choiforge.exceptions import ChoiForgeError, InputError
from choiforge.generators.decomposable import train_non_cp_decomposable
from choiforge.monitoring.run_metrics import RunMetrics, host_snapshot
from choiforge.optimizer.losses import LossMode
from choiforge.optimizer.records import RunRecord, nan_to_none, save_run
from choiforge.optimizer.train import random_init, train_loop
from choiforge.optimizer.xi import bound_report
from choiforge.sdp.certificates import CertificateEngine
from choiforge.sdp.conic import ExtendSide

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_SOLVER = 3


class _Parser(argparse.ArgumentParser):
    """Reports bad flags as input errors (exit 1) instead of exiting with 2"""

    def error(self, message: str):
        self.print_usage(sys.stderr)
        raise InputError(f"{self.prog}: {message}")


def _default(section: str, key: str) -> Any:
    section_model = ConfigSchema.model_fields[section].annotation
    value = section_model.model_fields[key].default
    return value.value if hasattr(value, "value") else value


def parse_complex(text: str) -> complex:
    """Accept 're' or 're+imj' (also 're-imj', 'imj')"""
    try:
        return complex(text.replace(" ", ""))
    except ValueError:
        raise argparse.ArgumentTypeError(f"invalid complex value {text!r}; use re or re+imj")


def _out(args: argparse.Namespace, payload: Dict[str, Any], text: List[str]) -> None:
    """Print a report as text lines or a single JSON object"""
    if args.format == "json":
        print(json.dumps({"header": args.header, **payload}, default=_json_default))
    else:
        print(
            f"# choiforge {args.header['version']} seed={args.header['seed']} "
            f"config={args.header['config_hash'][:12]}"
        )
        for line in text:
            print(line)


def _json_default(value: Any) -> Any:
    if isinstance(value, (np.floating, np.integer)):
        return value.item()
    if isinstance(value, complex):
        return [value.real, value.imag]
    return str(value)


def _fmt(value: Optional[float]) -> str:
    return "nan" if value is None or np.isnan(value) else f"{value:.10g}"


def _run_payload(record: RunRecord, directory: Path) -> Dict[str, Any]:
    last = record.rows[-1] if record.rows else None
    return {
        "outcome": record.outcome.value,
        "success_epoch": record.success_epoch,
        "epochs": record.epochs,
        "final_loss": nan_to_none(last.loss) if last else None,
        "final_zeta1": nan_to_none(last.zeta1) if last else None,
        "final_zetak": nan_to_none(last.zetak) if last else None,
        "directory": str(directory),
    }


def _run_lines(payload: Dict[str, Any]) -> List[str]:
    return [
        f"outcome: {payload['outcome']}",
        f"success_epoch: {payload['success_epoch']}",
        f"epochs: {payload['epochs']}",
        f"final_loss: {_fmt(payload['final_loss'])}",
        f"final_zeta1: {_fmt(payload['final_zeta1'])}",
        f"final_zetak: {_fmt(payload['final_zetak'])}",
        f"artifacts: {payload['directory']}",
    ]


def _summary_payload(summary: CampaignSummary) -> Dict[str, Any]:
    frame = summary.frame.astype(object).where(summary.frame.notna(), None)
    return {"summary": frame.to_dict(orient="records")}


def _summary_lines(summary: CampaignSummary) -> List[str]:
    if summary.frame.empty:
        return ["no runs"]
    return summary.frame.to_string(index=False).splitlines()


def cmd_generate(args, config: ConfigManager, metrics: RunMetrics) -> int:
    """Train one map with the certificate loss"""
    mode = LossMode(args.mode)
    loss_cfg = config.loss_config(mode)
    train_cfg = config.train_config()
    mask = resolve_mask(args.mask, args.d, args.d_out, seed=train_cfg.seed)
    init = random_init(
        args.d,
        args.d_out,
        train_cfg,
        mask=mask,
        tp=args.tp,
        real=args.real,
        tp_mode=TpMode(args.tp_mode),
    )
    record = train_loop(init, loss_cfg, train_cfg, solver_options=config.solver_options(), metrics=metrics)
    out = Path(args.out or Path(config.get("campaign.output_dir")) / "generate" / str(train_cfg.seed))
    record.metadata["config_hash"] = args.header["config_hash"]
    save_run(record, out)
    payload = _run_payload(record, out)
    _out(args, payload, _run_lines(payload))
    return record.outcome.exit_code


def _certify_values(choi, k: int, engine: CertificateEngine, config: ConfigManager) -> Dict[str, Any]:
    cert1 = engine.zeta(choi, 1)
    certk = engine.zeta(choi, k)
    probe_min, _ = block_positivity_probe(
        choi,
        config.get("validation.probe_samples"),
        config.get("validation.seesaw_iters"),
        np.random.default_rng(0),
    )
    return {
        "zeta1": nan_to_none(cert1.value),
        "zetak": nan_to_none(certk.value),
        "k": k,
        "status": {"zeta1": cert1.status.value, "zetak": certk.status.value},
        "non_decomposable": bool(cert1.ok and cert1.value < -engine.options.cert_tol),
        "positive_on_relaxation": bool(certk.ok and certk.value >= -engine.options.cert_tol),
        "lambda_min": choi.min_eigenvalue(),
        "lambda_min_pt": choi.min_eigenvalue_pt(),
        "probe_min": probe_min,
        "solved": cert1.ok and certk.ok,
    }


def cmd_certify(args, config: ConfigManager, metrics: RunMetrics) -> int:
    """Print both certificates and the spectral checks for a Choi file"""
    choi = load_choi(args.path)
    engine = CertificateEngine(config.solver_options(), metrics=metrics)
    values = _certify_values(choi, args.k or config.get("loss.k"), engine, config)
    lines = [
        f"zeta1: {_fmt(values['zeta1'])}",
        f"zeta{values['k']}: {_fmt(values['zetak'])}",
        f"lambda_min(C): {_fmt(values['lambda_min'])}",
        f"lambda_min(C^T_B): {_fmt(values['lambda_min_pt'])}",
        f"probe_min: {_fmt(values['probe_min'])}",
        f"non_decomposable: {values['non_decomposable']}",
        f"positive_on_relaxation: {values['positive_on_relaxation']}",
    ]
    _out(args, values, lines)
    return EXIT_OK if values["solved"] else EXIT_SOLVER


def cmd_validate(args, config: ConfigManager, metrics: RunMetrics) -> int:
    """Full found-map report for a Choi file or a run directory"""
    path = Path(args.path)
    mask = None
    settings = config.validation_settings()
    if path.is_dir():
        sidecar = path / "config.json"
        if sidecar.is_file():
            with open(sidecar) as f:
                loss = json.load(f).get("loss", {})
            settings = settings.model_copy(
                update={k: loss[k] for k in ("epsilon", "k") if k in loss}
            )
        if (path / "mask.json").is_file():
            mask = load_mask(path / "mask.json")
        path = path / "choi.json"
    if args.k:
        settings = settings.model_copy(update={"k": args.k})
    choi = load_choi(path)
    engine = CertificateEngine(config.solver_options(), metrics=metrics)
    report = validate_found_map(choi, settings, mask=mask, engine=engine)

    payload = report.to_dict()
    lines = [f"{key}: {value}" for key, value in report.values.items()]
    lines.append(f"non_decomposable: {report.non_decomposable}")
    lines.append(f"passed: {report.passed}")
    lines.extend(f"[{f.severity.value}] {f.check}: {f.message}" for f in report.findings)
    _out(args, payload, lines)
    return EXIT_OK if report.solved else EXIT_SOLVER


def cmd_family(args, config: ConfigManager, metrics: RunMetrics) -> int:
    """Write the Choi matrix of one member of the 3x3 family"""
    params = FamilyParams(args.a, args.b, args.c, args.w, args.z)
    choi = family_choi(params)
    out = save_choi(choi, args.out)
    payload = {"path": str(out), "trace_preserving": params.trace_preserving}
    _out(args, payload, [f"wrote {out}", f"trace_preserving: {params.trace_preserving}"])
    return EXIT_OK


def cmd_bound(args, config: ConfigManager, metrics: RunMetrics) -> int:
    """Spectral bound report for a square map"""
    report = bound_report(load_choi(args.path))
    payload = {
        "trace": report.trace,
        "min_real": report.min_real,
        "xi": report.xi,
        "degenerate": report.degenerate,
        "verdict": report.verdict,
    }
    lines = [
        f"Tr Phi: {_fmt(report.trace)}",
        f"min Re spec(Phi): {_fmt(report.min_real)}",
        f"xi: {_fmt(report.xi)}",
        report.verdict,
    ]
    _out(args, payload, lines)
    return EXIT_OK


def cmd_compose(args, config: ConfigManager, metrics: RunMetrics) -> int:
    """Choi matrix of first o second (second applied first)"""
    composed = compose_choi(load_choi(args.first), load_choi(args.second))
    out = save_choi(composed, args.out)
    payload = {"path": str(out), "d_in": composed.d_in, "d_out": composed.d_out}
    _out(args, payload, [f"wrote {out} ({composed.d_in} -> {composed.d_out})"])
    return EXIT_OK


def cmd_decomposable(args, config: ConfigManager, metrics: RunMetrics) -> int:
    """Train a decomposable map that is not completely positive"""
    train_cfg = config.train_config()
    ancilla = args.ancilla or config.get("generators.ancilla_dim")
    spec, record = train_non_cp_decomposable(args.d, train_cfg, ancilla, metrics=metrics)
    out = Path(args.out or Path(config.get("campaign.output_dir")) / "decomposable" / str(train_cfg.seed))
    save_run(record, out)
    payload = {
        "outcome": record.outcome.value,
        "success_epoch": record.success_epoch,
        "epochs": record.epochs,
        "p": spec.p,
        "lambda_min": record.final_choi.min_eigenvalue(),
        "directory": str(out),
    }
    lines = [f"{key}: {value}" for key, value in payload.items()]
    _out(args, payload, lines)
    return record.outcome.exit_code


def _campaign_exit(summary: CampaignSummary) -> int:
    frame = summary.frame
    if not frame.empty and int(frame["solver_failures"].sum()) == int(frame["runs"].sum()):
        return EXIT_SOLVER
    return EXIT_OK


def cmd_pptsq(args, config: ConfigManager, metrics: RunMetrics) -> int:
    """Batch of joint positive/PPT trainings searching for a decomposability violation"""
    spec = CampaignSpec(
        experiment=args.experiment,
        kind=CampaignKind.PPT_SQUARE,
        d_in=args.small,
        d_out=args.large,
        k=config.get("loss.k"),
        runs=args.runs,
        base_seed=config.get("training.seed"),
        epsilons=[config.get("loss.epsilon")],
        gammas=[config.get("generators.positivity_weight")],
        train=config.train_config(),
        ppt_penalty_weight=config.get("generators.ppt_penalty_weight"),
    )
    summary = run_campaign(
        spec,
        config.get("campaign.output_dir"),
        config.get("campaign.jobs"),
        config.solver_options(),
        metrics=metrics,
    )
    flagged = int(summary.frame["flagged"].sum()) if not summary.frame.empty else 0
    if flagged:
        logger.warning(f"{flagged} run(s) flagged for manual review")
    payload = {**_summary_payload(summary), "flagged": flagged}
    _out(args, payload, _summary_lines(summary) + [f"flagged: {flagged}"])
    return _campaign_exit(summary)


def cmd_sweep(args, config: ConfigManager, metrics: RunMetrics) -> int:
    """Run a campaign from a spec file or a named preset"""
    if args.spec:
        spec = load_campaign_spec(args.spec)
        if args.runs:
            spec = spec.model_copy(update={"runs": args.runs})
    else:
        spec = preset(args.preset, args.runs or config.get("campaign.runs_per_cell"))
    summary = run_campaign(
        spec,
        config.get("campaign.output_dir"),
        config.get("campaign.jobs"),
        config.solver_options(),
        config.validation_settings(),
        metrics=metrics,
    )
    if args.export:
        records = load_campaign_records(Path(config.get("campaign.output_dir")) / spec.experiment)
        export_plot_data(records, args.export)
    _out(args, _summary_payload(summary), _summary_lines(summary))
    return _campaign_exit(summary)


def cmd_real(args, config: ConfigManager, metrics: RunMetrics) -> int:
    """Search for real non-decomposable maps from 2 to m levels"""
    base = CampaignSpec(
        experiment=args.experiment or f"real_m{args.m}",
        k=config.get("loss.k"),
        base_seed=config.get("training.seed"),
        epsilons=[config.get("loss.epsilon")],
        gammas=[config.get("loss.gamma")],
        train=config.train_config(),
    )
    summary = real_map_campaign(
        args.m,
        args.runs,
        masks=args.mask,
        base=base,
        output_dir=config.get("campaign.output_dir"),
        jobs=config.get("campaign.jobs"),
        solver_options=config.solver_options(),
        validation=config.validation_settings(),
    )
    _out(args, _summary_payload(summary), _summary_lines(summary))
    return _campaign_exit(summary)


def cmd_export(args, config: ConfigManager, metrics: RunMetrics) -> int:
    """Plot-ready CSVs for every run below a directory"""
    records = load_campaign_records(args.root)
    paths = export_plot_data(records, args.out)
    payload = {name: str(p) for name, p in paths.items()}
    _out(args, payload, [f"{name}: {p}" for name, p in payload.items()])
    return EXIT_OK


def _add_common(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config-dir", default=None, help="Configuration directory")
    parser.add_argument(
        "--env", choices=[e.value for e in Environment], default=None, help="Configuration environment"
    )
    parser.add_argument("--format", choices=["text", "json"], default="text", help="Report format")
    parser.add_argument("--jobs", type=int, default=None, help="Parallel runs (default: 1)")
    parser.add_argument("--metrics-port", type=int, default=None, help="Expose Prometheus metrics")
    parser.add_argument("--log-level", default=None, help="Logging level (default: INFO)")
    parser.add_argument(
        "--extend-side",
        choices=[s.value for s in ExtendSide],
        default=None,
        help="Subsystem carrying the symmetric extension (default: second)",
    )


def _add_training(parser: argparse.ArgumentParser) -> None:
    parser.add_argument(
        "--lr", type=float, default=None, help=f"Learning rate (default: {_default('training', 'learning_rate')})"
    )
    parser.add_argument(
        "--epochs", type=int, default=None, help=f"Epoch budget (default: {_default('training', 'max_epochs')})"
    )
    parser.add_argument(
        "--seed", type=int, default=None, help=f"Random seed (default: {_default('training', 'seed')})"
    )


def _add_loss(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--k", type=int, default=None, help=f"Extension level (default: {_default('loss', 'k')})")
    parser.add_argument(
        "--epsilon", type=float, default=None, help=f"Margin on zeta_1 (default: {_default('loss', 'epsilon')})"
    )
    parser.add_argument(
        "--gamma", type=float, default=None, help=f"Positivity weight (default: {_default('loss', 'gamma')})"
    )


def build_parser() -> argparse.ArgumentParser:
    common = _Parser(add_help=False)
    _add_common(common)
    parser = _Parser(prog="choiforge", description="Positive non-decomposable map toolkit")
    parser.add_argument("--version", action="version", version=f"choiforge {__version__}")
    subparsers = parser.add_subparsers(dest="command")

    # Generate command
    gen = subparsers.add_parser("generate", parents=[common], help="Train a non-decomposable map")
    gen.add_argument("--d", type=int, required=True, help="Input dimension")
    gen.add_argument("--d-out", type=int, required=True, help="Output dimension")
    _add_loss(gen)
    _add_training(gen)
    gen.add_argument("--tp", action="store_true", help="Trace-preserving parametrization")
    gen.add_argument(
        "--tp-mode", choices=[m.value for m in TpMode], default=TpMode.EXACT.value, help="TP handling"
    )
    gen.add_argument("--real", action="store_true", help="Real Choi matrix")
    gen.add_argument("--mask", default=None, help="Mask file or builtin (family9, full, random:<p>)")
    gen.add_argument(
        "--mode", choices=[LossMode.MAIN.value, LossMode.BOUND.value], default=LossMode.MAIN.value, help="Loss"
    )
    gen.add_argument(
        "--delta", type=float, default=None, help=f"Bound-mode margin (default: {_default('loss', 'delta')})"
    )
    gen.add_argument("--omega", type=float, default=None, help=f"Bound weight (default: {_default('loss', 'omega')})")
    gen.add_argument("--nu", type=float, default=None, help=f"Bound margin (default: {_default('loss', 'nu')})")
    gen.add_argument("--out", default=None, help="Artifact directory")

    # Certify command
    cert = subparsers.add_parser("certify", parents=[common], help="Certificates for a Choi file")
    cert.add_argument("path", help="Choi JSON file")
    cert.add_argument("--k", type=int, default=None, help=f"Extension level (default: {_default('loss', 'k')})")

    # Validate command
    val = subparsers.add_parser("validate", parents=[common], help="Found-map report")
    val.add_argument("path", help="Choi JSON file or run directory")
    val.add_argument("--k", type=int, default=None, help=f"Extension level (default: {_default('loss', 'k')})")

    # Family command
    fam = subparsers.add_parser("family", parents=[common], help="Write a 3x3 family member")
    fam.add_argument("--a", type=float, required=True, help="Diagonal weight a")
    fam.add_argument("--b", type=float, required=True, help="Diagonal weight b")
    fam.add_argument("--c", type=float, required=True, help="Diagonal weight c")
    fam.add_argument("--w", type=parse_complex, default=0j, help="Coherence w (re or re+imj)")
    fam.add_argument("--z", type=parse_complex, default=0j, help="Coherence z (re or re+imj)")
    fam.add_argument("--out", default="family.json", help="Output Choi file (default: family.json)")

    # Bound command
    bnd = subparsers.add_parser("bound", parents=[common], help="Spectral bound report")
    bnd.add_argument("path", help="Choi JSON file")

    # Compose command
    comp = subparsers.add_parser("compose", parents=[common], help="Compose two maps")
    comp.add_argument("first", help="Outer map (applied last)")
    comp.add_argument("second", help="Inner map (applied first)")
    comp.add_argument("--out", default="composed.json", help="Output Choi file (default: composed.json)")

    # Decomposable command
    dec = subparsers.add_parser("decomposable", parents=[common], help="Train a decomposable non-CP map")
    dec.add_argument("--d", type=int, default=3, help="System dimension (default: 3)")
    dec.add_argument("--ancilla", type=int, default=None, help="Ancilla dimension (default: d)")
    _add_training(dec)
    dec.add_argument("--out", default=None, help="Artifact directory")

    # PPT-square command
    ppt = subparsers.add_parser("pptsq", parents=[common], help="PPT-square search batch")
    ppt.add_argument("--small", type=int, default=2, help="Intermediate dimension (default: 2)")
    ppt.add_argument("--large", type=int, default=4, help="Outer dimension (default: 4)")
    ppt.add_argument("--runs", type=int, default=10, help="Runs (default: 10)")
    ppt.add_argument(
        "--penalty-weight",
        type=float,
        default=None,
        help=f"PPT hinge weight (default: {_default('generators', 'ppt_penalty_weight')})",
    )
    ppt.add_argument(
        "--positivity-weight",
        type=float,
        default=None,
        help=f"Positivity hinge weight (default: {_default('generators', 'positivity_weight')})",
    )
    ppt.add_argument("--experiment", default="pptsq", help="Experiment tag (default: pptsq)")
    _add_loss(ppt)
    _add_training(ppt)

    # Sweep command
    swp = subparsers.add_parser("sweep", parents=[common], help="Run a campaign")
    source = swp.add_mutually_exclusive_group(required=True)
    source.add_argument("--spec", default=None, help="Campaign spec file (JSON or YAML)")
    source.add_argument("--preset", choices=preset_names(), default=None, help="Named campaign")
    swp.add_argument("--runs", type=int, default=None, help="Runs per cell")
    swp.add_argument("--out", default=None, help="Artifact root (default: runs)")
    swp.add_argument("--export", default=None, help="Also write plot CSVs to this directory")

    # Real-map command
    real = subparsers.add_parser("real", parents=[common], help="Real non-decomposable map search")
    real.add_argument("--m", type=int, required=True, help="Output dimension (at least 4)")
    real.add_argument("--runs", type=int, default=20, help="Runs per mask (default: 20)")
    real.add_argument("--mask", action="append", default=None, help="Mask; repeat for several")
    real.add_argument("--experiment", default=None, help="Experiment tag")
    real.add_argument("--out", default=None, help="Artifact root (default: runs)")
    _add_loss(real)
    _add_training(real)

    # Export command
    exp = subparsers.add_parser("export", parents=[common], help="Plot CSVs from run directories")
    exp.add_argument("root", help="Directory holding run directories")
    exp.add_argument("--out", required=True, help="Output directory")

    return parser


def _configure(args: argparse.Namespace) -> ConfigManager:
    env = Environment(args.env) if args.env else None
    config = ConfigManager(args.config_dir, env).initialize()
    overrides = {
        "loss.epsilon": getattr(args, "epsilon", None),
        "loss.gamma": getattr(args, "gamma", None),
        "loss.k": getattr(args, "k", None),
        "loss.delta": getattr(args, "delta", None),
        "loss.omega": getattr(args, "omega", None),
        "loss.nu": getattr(args, "nu", None),
        "training.learning_rate": getattr(args, "lr", None),
        "training.max_epochs": getattr(args, "epochs", None),
        "training.seed": getattr(args, "seed", None),
        "generators.ppt_penalty_weight": getattr(args, "penalty_weight", None),
        "generators.positivity_weight": getattr(args, "positivity_weight", None),
        "solver.extend_side": args.extend_side,
        "campaign.jobs": args.jobs,
        "campaign.output_dir": getattr(args, "out", None) if args.command in ("sweep", "real") else None,
        "monitoring.log_level": args.log_level,
        "monitoring.metrics_port": args.metrics_port,
    }
    for key, value in overrides.items():
        config.override(key, value)
    return config


COMMANDS = {
    "generate": cmd_generate,
    "certify": cmd_certify,
    "validate": cmd_validate,
    "family": cmd_family,
    "bound": cmd_bound,
    "compose": cmd_compose,
    "decomposable": cmd_decomposable,
    "pptsq": cmd_pptsq,
    "sweep": cmd_sweep,
    "real": cmd_real,
    "export": cmd_export,
}


def main(argv: Optional[List[str]] = None) -> int:
    """Main CLI entrypoint"""
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        if args.command is None:
            parser.print_help()
            return 1

        config = _configure(args)
        log_format = "json" if args.format == "json" else config.get("monitoring.log_format")
        setup_logging(config.get("monitoring.log_level"), log_format)

        metrics = RunMetrics()
        if config.get("monitoring.metrics_port"):
            metrics.start_http(config.get("monitoring.metrics_port"))

        args.header = {
            "version": __version__,
            "command": args.command,
            "seed": config.get("training.seed"),
            "config_hash": config.config_hash(),
            "started": datetime.now(timezone.utc).isoformat(),
            "host": host_snapshot(),
        }
        logger.info(f"choiforge {args.command}", extra=args.header)
        return COMMANDS[args.command](args, config, metrics)
    except ChoiForgeError as e:
        logger.error(str(e))
        return e.exit_code
    except Exception as e:
        logger.exception(f"Unexpected failure: {str(e)}")
        return 1


if __name__ == "__main__":
    sys.exit(main())
