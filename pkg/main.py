#!/usr/bin/env python3
"""
Script principal: preprocesamiento, meta-entrenamiento, adaptación few-shot,
evaluación, ablación y generación de la flota sintética.

Uso:
    python main.py preprocess --config run.json --out runs/fd001
    python main.py meta-train --config run.json --seed 7 --out runs/fd001
    python main.py adapt --checkpoint runs/fd001/model.ckpt --support soporte.csv --shots 15
    python main.py evaluate --checkpoint runs/fd001/model.ckpt --out runs/fd001
    python main.py ablate --config run.json --out runs/ablacion
    python main.py synth --config run.json --out runs/flota

Códigos de salida: 0 éxito, 1 error de ejecución, 2 error de uso.
"""
import argparse
import sys
from pathlib import Path
from typing import Any, Dict, List, Optional

import numpy as np

from src.config.run_config import RunConfig, build_config, load_config, merge_config
from src.data.cache import read_windows_csv, save_dataset
from src.data.pipeline import config_for_dataset, dataset_tasks, load_dataset
from src.data.records import SampleBatch
from src.data.synthetic import synthesize_degradation_fleet, write_fleet_csv
from src.errors import PreprocessingError, RulMetaPinnError
from src.evaluation.ablation import run_ablation, write_ablation_csv
from src.evaluation.evaluate import evaluate_cmapss_last_point, evaluate_few_shot, mean_rul_baseline
from src.evaluation.report import emit_report, write_training_log
from src.graph import meta_train
from src.training.losses import PinnObjective
from src.training.meta import few_shot_adapt
from src.utils.checkpoint import load_checkpoint, save_checkpoint
from src.utils.logging_setup import configure_logging
from src.utils.seeding import make_rng

COMMANDS = ["preprocess", "meta-train", "adapt", "evaluate", "ablate", "synth"]


class UsageError(Exception):
    """Error de uso de la línea de comandos (salida 2)."""


class CliParser(argparse.ArgumentParser):
    """ArgumentParser que imprime el uso en stdout y delega el mensaje de error a cli_dispatch."""

    def error(self, message: str):
        self.print_usage(sys.stdout)
        raise UsageError(message)


# =========================================================================
# Helpers
# =========================================================================

def _overrides(args: argparse.Namespace) -> Dict[str, Any]:
    overrides: Dict[str, Any] = {}
    if getattr(args, "seed", None) is not None:
        overrides["seed"] = args.seed
    if getattr(args, "subset", None) is not None:
        overrides["data"] = {"subset": args.subset}
    return overrides


def _config(args: argparse.Namespace) -> RunConfig:
    return load_config(args.config, _overrides(args))


def _out_dir(args: argparse.Namespace, config: RunConfig) -> Path:
    return Path(args.out) if args.out else Path(config.output_dir)


def _checkpoint_metadata(dataset) -> Dict[str, Any]:
    return {
        "profile": dataset.profile,
        "label_scale": dataset.label_scale,
        "time_scale": dataset.time_scale,
        "window_length": dataset.window_length,
        "n_features": dataset.n_features,
        "feature_names": dataset.feature_names,
    }


def _show(title: str, summary: Dict[str, Any]) -> None:
    values = ", ".join(f"{k}={v:.4f}" if isinstance(v, float) else f"{k}={v}" for k, v in summary.items())
    print(f"{title}: {values}")


# =========================================================================
# Subcomandos
# =========================================================================

def cmd_preprocess(args: argparse.Namespace) -> int:
    config = _config(args)
    dataset = load_dataset(config)
    out = _out_dir(args, config) / "dataset"
    save_dataset(dataset, out)
    print(f"Conjunto procesado: {out} ({len(dataset.source)} unidades de origen, {len(dataset.target)} objetivo)")
    return 0


def cmd_meta_train(args: argparse.Namespace) -> int:
    config = _config(args)
    dataset = load_dataset(config)
    config = config_for_dataset(config, dataset)
    tasks = dataset_tasks(dataset, config)
    result = meta_train(tasks, config, label_scale=dataset.label_scale, verbose=not args.quiet)

    out = _out_dir(args, config)
    ckpt = save_checkpoint(
        result.params,
        config,
        out / "model.ckpt",
        provenance={"seed": config.seed, "iteration": result.best_iteration},
        metadata=_checkpoint_metadata(dataset),
    )
    log = write_training_log(result.log, out / "training_log.csv")
    print(f"Checkpoint: {ckpt}")
    print(f"Registro de entrenamiento: {log}")
    return 0


def cmd_adapt(args: argparse.Namespace) -> int:
    base = load_checkpoint(args.checkpoint)
    config = base.config
    if args.seed is not None:
        config = build_config(merge_config(config.model_dump(mode="json"), {"seed": args.seed}))
    shots = config.meta.shots if args.shots is None else args.shots
    if shots < 0:
        raise UsageError("--shots debe ser >= 0")

    params = base.params
    if shots > 0:
        if not args.support:
            raise UsageError("--support es obligatorio con --shots > 0")
        windows = read_windows_csv(args.support)
        hsm = config.model.hsm
        shape = windows[0].features.shape if windows else None
        if shape != (hsm.time_steps, hsm.input_features):
            raise PreprocessingError(
                f"--support: ventanas {shape} distintas de la forma del modelo ({hsm.time_steps}, {hsm.input_features})"
            )
        if shots > len(windows):
            raise PreprocessingError(f"--shots {shots} supera las {len(windows)} ventanas de {args.support}")
        chosen = np.sort(make_rng(config.seed, "adapt-support").choice(len(windows), size=shots, replace=False))
        label_scale = float(base.metadata.get("label_scale", config.data.rul_cap))
        meta = config.meta
        params = few_shot_adapt(
            base.params,
            SampleBatch.from_windows([windows[i] for i in chosen], label_scale),
            PinnObjective(config.model, config.loss),
            steps=meta.adapt_steps,
            batch_size=meta.inner_batch_size,
            rng=make_rng(config.seed, "adapt"),
            lr=meta.inner_lr,
            beta1=meta.beta1,
            beta2=meta.beta2,
            eps=meta.adam_eps,
        )

    out = Path(args.out) if args.out else Path(args.checkpoint).with_name("adapted.ckpt")
    if out.suffix != ".ckpt":
        out = out / "adapted.ckpt"
    provenance = dict(base.provenance, base_checkpoint=str(args.checkpoint), shots=shots)
    save_checkpoint(params, config, out, provenance=provenance, metadata=base.metadata)
    print(f"Checkpoint adaptado ({shots} shots): {out}")
    return 0


def cmd_evaluate(args: argparse.Namespace) -> int:
    ckpt = load_checkpoint(args.checkpoint)
    document = ckpt.config.model_dump(mode="json")
    if args.config:
        document = merge_config(document, load_config(args.config).model_dump(mode="json", exclude={"model"}))
    document = merge_config(document, _overrides(args))
    config = build_config(document)
    dataset = load_dataset(config)
    config = config_for_dataset(config, dataset)
    label_scale = float(ckpt.metadata.get("label_scale", dataset.label_scale))
    out = _out_dir(args, config)

    if dataset.profile == "cmapss":
        report = evaluate_cmapss_last_point(ckpt.params, dataset.target, config, label_scale)
        baseline = mean_rul_baseline(dataset.source_labels(), report.true)
        emit_report(baseline, out / "baseline.json")
        _show("Línea base (RUL media)", baseline.summary())
    else:
        result = evaluate_few_shot(ckpt.params, dataset.target, config, label_scale, shots=args.shots)
        report = result.pooled
        emit_report(result.zero_shot, out / "zero_shot.json")
        _show("0-shot", result.zero_shot.summary())
    emit_report(report, out / "report.csv")
    emit_report(report, out / "report.json")
    _show("Evaluación", report.summary())
    return 0


def cmd_ablate(args: argparse.Namespace) -> int:
    config = _config(args)
    dataset = load_dataset(config)
    config = config_for_dataset(config, dataset)
    rows = run_ablation(dataset, config, repeats=args.repeats, verbose=not args.quiet)
    path = write_ablation_csv(rows, _out_dir(args, config) / "ablation.csv")
    for row in rows:
        _show(f"{row.variant} (semilla {row.seed})", row.report.summary())
    print(f"Tabla de ablación: {path}")
    return 0


def cmd_synth(args: argparse.Namespace) -> int:
    config = _config(args)
    fleet = synthesize_degradation_fleet(config.data.synthetic, config.seed)
    path = write_fleet_csv(fleet, _out_dir(args, config) / "fleet.csv")
    print(f"Flota sintética: {path} ({len(fleet)} unidades)")
    return 0


HANDLERS = {
    "preprocess": cmd_preprocess,
    "meta-train": cmd_meta_train,
    "adapt": cmd_adapt,
    "evaluate": cmd_evaluate,
    "ablate": cmd_ablate,
    "synth": cmd_synth,
}


def build_parser() -> CliParser:
    """Parser con un subcomando por operación."""
    parser = CliParser(
        prog="main.py",
        description="Predicción de RUL con PINN meta-aprendida (PDE descubierta por el regulador físico)",
    )
    subparsers = parser.add_subparsers(dest="command", metavar="{" + ",".join(COMMANDS) + "}")
    subparsers.required = True

    for name in COMMANDS:
        sub = subparsers.add_parser(name)
        sub.add_argument("--config", type=str, default=None, help="Archivo JSON de configuración")
        sub.add_argument("--seed", type=int, default=None, help="Semilla (pisa a la de la configuración)")
        sub.add_argument("--out", type=str, default=None, help="Directorio (o archivo) de salida")
        sub.add_argument("--quiet", "-q", action="store_true", help="Modo silencioso")
        if name in ("preprocess", "meta-train", "evaluate", "ablate"):
            sub.add_argument(
                "--subset", choices=["FD001", "FD002", "FD003", "FD004"], default=None, help="Subconjunto C-MAPSS"
            )
        if name in ("adapt", "evaluate"):
            sub.add_argument("--checkpoint", type=str, required=True, help="Checkpoint de entrada")
            sub.add_argument("--shots", type=int, default=None, help="K muestras de soporte (default: meta.shots)")
        if name == "adapt":
            sub.add_argument("--support", type=str, default=None, help="CSV de ventanas de soporte")
        if name == "ablate":
            sub.add_argument("--repeats", type=int, default=1, help="Corridas por variante")
    return parser


def cli_dispatch(argv: Optional[List[str]] = None) -> int:
    """
    Ejecuta un subcomando y devuelve el código de salida.

    Cada falla imprime exactamente una línea "error: ..." en stderr.

    Args:
        argv: Argumentos (sin el nombre del programa); por defecto sys.argv[1:].

    Returns:
        int: 0 éxito, 1 error de ejecución, 2 error de uso.
    """
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except SystemExit as exc:
        return int(exc.code or 0)

    try:
        configure_logging(verbose=not args.quiet)
        return HANDLERS[args.command](args)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (RulMetaPinnError, OSError) as exc:
        message = " ".join(str(exc).split())
        print(f"error: {message}", file=sys.stderr)
        return 1
    except KeyboardInterrupt:
        print("error: proceso interrumpido por el usuario", file=sys.stderr)
        return 1


def main():
    """Función principal."""
    sys.exit(cli_dispatch(sys.argv[1:]))


if __name__ == "__main__":
    main()
