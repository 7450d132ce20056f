"""Command-line surface: data generation, one-shot querying, simulation, reports.

Exit codes: 0 on success, 1 for I/O and parse failures, 2 for invalid
configuration or contract violations. All diagnostics go to stderr.
Result files are written atomically (temp file, then rename) so fanned-out
simulation workers never leave partial files behind. The environment
variable ``SUPCLUST_THREADS`` caps the simulate worker count (0 = auto).
"""

import csv
import functools
import hashlib
import io
import json
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass
from pathlib import Path

import click
import numpy as np

from . import __version__
from .dataset import ImbalanceProfile, l2_normalize, load_embeddings, make_blobs, save_embeddings
from .exceptions import ConfigError, DataFormatError
from .harness import (
    DEFAULT_TEST_FRACTION,
    ALRunRecord,
    BudgetSchedule,
    run_al_loop,
    summarize_runs,
)
from .probe import DEFAULT_EPOCHS, DEFAULT_L2, DEFAULT_LEARNING_RATE
from .scoring import DEFAULT_TEMPERATURE, DEFAULT_TYPICALITY_K
from .strategies import (
    DEFAULT_FILTER_FRACTION,
    STRATEGY_KINDS,
    LabeledPool,
    StrategyConfig,
    make_strategy,
)

EXIT_DATA = 1
EXIT_CONFIG = 2

STRATEGY_FLAGS = tuple(kind.replace("_", "-") for kind in STRATEGY_KINDS)


@dataclass(frozen=True)
class RunManifest:
    """Everything needed to reproduce a command's outputs bit for bit."""

    command: str
    parameters: dict
    seeds: list[int]
    dataset_checksum: str
    artifact_version: str = __version__
    dataset_file: str | None = None

    def to_json_bytes(self) -> bytes:
        return _to_json_bytes({k: v for k, v in asdict(self).items() if v is not None})


def _handle_errors(fn):
    @functools.wraps(fn)
    def wrapper(*args, **kwargs):
        try:
            return fn(*args, **kwargs)
        except (DataFormatError, OSError) as exc:
            click.echo(f"error: {exc}", err=True)
            sys.exit(EXIT_DATA)
        except (ConfigError, ValueError) as exc:
            click.echo(f"error: {exc}", err=True)
            sys.exit(EXIT_CONFIG)

    return wrapper


def _write_atomic(path: Path, payload: bytes) -> None:
    tmp = path.with_name(f"{path.name}.{os.getpid()}.tmp")
    tmp.write_bytes(payload)
    os.replace(tmp, path)


def _sha256(path: Path) -> str:
    return hashlib.sha256(path.read_bytes()).hexdigest()


def _infer_format(path: Path, fmt: str) -> str:
    if fmt != "auto":
        return fmt
    return "csv" if path.suffix.lower() == ".csv" else "raw_f32"


def _load_dataset(path: Path, fmt: str, normalize: str):
    data = load_embeddings(path, _infer_format(path, fmt))
    if normalize == "l2":
        data = l2_normalize(data)
    return data


def _read_labeled_file(path: Path) -> list[int]:
    indices = []
    for lineno, line in enumerate(path.read_text(encoding="utf-8").splitlines(), start=1):
        token = line.strip()
        if not token:
            continue
        try:
            indices.append(int(token))
        except ValueError:
            raise DataFormatError(
                f"{path}: line {lineno}: expected an integer index, got {token!r}"
            ) from None
    return indices


def _read_proba_file(path: Path, n: int) -> np.ndarray:
    try:
        proba = np.loadtxt(path, delimiter=",", ndmin=2, dtype=np.float64)
    except ValueError as exc:
        raise DataFormatError(f"{path}: cannot parse probability matrix: {exc}") from None
    if proba.shape[0] != n:
        raise DataFormatError(
            f"{path}: probability matrix has {proba.shape[0]} rows, dataset has {n}"
        )
    return proba


@click.group()
@click.version_option(__version__)
def main():
    """Active-learning query strategies over embedding datasets."""


@main.command("gen-data")
@click.option("--classes", type=int, default=10, show_default=True, help="Number of classes (>= 2).")
@click.option("--max-per-class", type=int, default=500, show_default=True, help="Samples in the largest class.")
@click.option("--imbalance", type=float, default=50.0, show_default=True, help="Ratio between the biggest and smallest class.")
@click.option("--dim", type=int, default=32, show_default=True, help="Embedding dimensionality.")
@click.option("--center-spread", type=float, default=1.0, show_default=True, help="Class centers are drawn from [-spread, spread]^dim.")
@click.option("--cluster-std", type=float, default=0.35, show_default=True, help="Isotropic noise around each class center.")
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("-o", "--output", type=click.Path(dir_okay=False, path_type=Path), required=True)
@_handle_errors
def cmd_gen_data(classes, max_per_class, imbalance, dim, center_spread, cluster_std, seed, output):
    """Write a synthetic long-tail blob dataset in the binary format."""
    if classes < 2:
        raise ConfigError("--classes must be >= 2")
    if max_per_class < 1:
        raise ConfigError("--max-per-class must be >= 1")
    profile = ImbalanceProfile(num_classes=classes, max_per_class=max_per_class, imbalance_factor=imbalance)
    data = make_blobs(profile, dim=dim, center_spread=center_spread, cluster_std=cluster_std, seed=seed)
    save_embeddings(data, output, "raw_f32")
    manifest = RunManifest(
        command="gen-data",
        parameters={
            "classes": classes,
            "max_per_class": max_per_class,
            "imbalance": imbalance,
            "dim": dim,
            "center_spread": center_spread,
            "cluster_std": cluster_std,
        },
        seeds=[seed],
        dataset_file=output.name,
        dataset_checksum=_sha256(output),
    )
    manifest_path = output.with_name(output.name + ".manifest.json")
    _write_atomic(manifest_path, manifest.to_json_bytes())
    click.echo(f"wrote {data.n} samples ({classes} classes) to {output}", err=True)


@main.command("query")
@click.argument("dataset", type=click.Path(dir_okay=False, path_type=Path))
@click.option("--format", "fmt", type=click.Choice(["auto", "csv", "raw_f32"]), default="auto", show_default=True)
@click.option("--strategy", type=click.Choice(STRATEGY_FLAGS), required=True)
@click.option("--budget", type=int, required=True, help="Number of samples to query.")
@click.option("--labeled-file", type=click.Path(dir_okay=False, path_type=Path), default=None, help="Newline-separated indices of already-labeled samples.")
@click.option("--proba-file", type=click.Path(dir_okay=False, path_type=Path), default=None, help="CSV probability matrix for uncertainty strategies.")
@click.option("-T", "--temperature", type=float, default=DEFAULT_TEMPERATURE, show_default=True)
@click.option("-K", "--typicality-k", type=int, default=DEFAULT_TYPICALITY_K, show_default=True)
@click.option("--filter-fraction", type=float, default=DEFAULT_FILTER_FRACTION, show_default=True)
@click.option("--typicality-scope", type=click.Choice(["cluster", "global"]), default="cluster", show_default=True)
@click.option("--probcover-radius", type=float, default=None)
@click.option("--normalize", type=click.Choice(["none", "l2"]), default="none", show_default=True)
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("-o", "--output", type=click.Path(dir_okay=False, path_type=Path), default=None, help="Write indices here instead of stdout.")
@_handle_errors
def cmd_query(dataset, fmt, strategy, budget, labeled_file, proba_file, temperature,
              typicality_k, filter_fraction, typicality_scope, probcover_radius,
              normalize, seed, output):
    """Run one query step and emit the selected indices, one per line."""
    data = _load_dataset(dataset, fmt, normalize)
    pool = LabeledPool(_read_labeled_file(labeled_file) if labeled_file else ())
    config = StrategyConfig(
        kind=strategy.replace("-", "_"),
        temperature=temperature,
        typicality_k=typicality_k,
        filter_fraction=filter_fraction,
        typicality_scope=typicality_scope,
        probcover_radius=probcover_radius,
        seed=seed,
    )
    proba = _read_proba_file(proba_file, data.n) if proba_file else None
    result = make_strategy(config).select(data.without_labels(), pool, budget, proba=proba)
    text = "\n".join(str(int(i)) for i in result.selected) + "\n"
    if output is None:
        click.echo(text, nl=False)
    else:
        _write_atomic(output, text.encode("utf-8"))


def _simulate_one(args):
    data, config, schedule, seed, test_fraction, probe_params = args
    record = run_al_loop(data, config, schedule, seed, test_fraction, probe_params)
    return (config.kind, seed), record


@main.command("simulate")
@click.argument("dataset", type=click.Path(dir_okay=False, path_type=Path))
@click.option("--format", "fmt", type=click.Choice(["auto", "csv", "raw_f32"]), default="auto", show_default=True)
@click.option("--strategies", required=True, help="Comma-separated strategy names (e.g. supclust,random).")
@click.option("--regime", type=click.Choice(["tiny", "small"]), required=True)
@click.option("--steps", type=int, default=5, show_default=True)
@click.option("--seeds", type=int, default=10, show_default=True, help="Number of seeded runs per strategy.")
@click.option("--seed-base", type=int, default=0, show_default=True, help="First seed; runs use seed_base .. seed_base+seeds-1.")
@click.option("-T", "--temperature", type=float, default=DEFAULT_TEMPERATURE, show_default=True)
@click.option("-K", "--typicality-k", type=int, default=DEFAULT_TYPICALITY_K, show_default=True)
@click.option("--filter-fraction", type=float, default=DEFAULT_FILTER_FRACTION, show_default=True)
@click.option("--typicality-scope", type=click.Choice(["cluster", "global"]), default="cluster", show_default=True)
@click.option("--probcover-radius", type=float, default=None)
@click.option("--test-fraction", type=float, default=DEFAULT_TEST_FRACTION, show_default=True)
@click.option("--probe-lr", type=float, default=DEFAULT_LEARNING_RATE, show_default=True)
@click.option("--probe-epochs", type=int, default=DEFAULT_EPOCHS, show_default=True)
@click.option("--probe-l2", type=float, default=DEFAULT_L2, show_default=True)
@click.option("--normalize", type=click.Choice(["none", "l2"]), default="none", show_default=True)
@click.option("-o", "--output-dir", type=click.Path(file_okay=False, path_type=Path), required=True)
@_handle_errors
def cmd_simulate(dataset, fmt, strategies, regime, steps, seeds, seed_base, temperature,
                 typicality_k, filter_fraction, typicality_scope, probcover_radius,
                 test_fraction, probe_lr, probe_epochs, probe_l2, normalize, output_dir):
    """Run multi-seed active-learning simulations and write records + summary."""
    data = _load_dataset(dataset, fmt, normalize)
    if data.labels is None:
        raise ConfigError("simulate requires a labeled dataset")
    if seeds < 1:
        raise ConfigError("--seeds must be >= 1")

    kinds = []
    for name in strategies.split(","):
        name = name.strip()
        if not name:
            continue
        kind = name.replace("-", "_")
        if kind not in STRATEGY_KINDS:
            raise ConfigError(f"unknown strategy {name!r}; expected one of {STRATEGY_FLAGS}")
        kinds.append(kind)
    if not kinds:
        raise ConfigError("--strategies must name at least one strategy")

    schedule = BudgetSchedule.for_regime(regime, data.num_classes, steps)
    probe_params = {"learning_rate": probe_lr, "epochs": probe_epochs, "l2": probe_l2}
    seed_list = list(range(seed_base, seed_base + seeds))

    tasks = []
    for kind in kinds:
        config = StrategyConfig(
            kind=kind,
            temperature=temperature,
            typicality_k=typicality_k,
            filter_fraction=filter_fraction,
            typicality_scope=typicality_scope,
            probcover_radius=probcover_radius,
        )
        for seed in seed_list:
            tasks.append((data, config, schedule, seed, test_fraction, probe_params))

    records = dict(_run_tasks(tasks))

    output_dir.mkdir(parents=True, exist_ok=True)
    ordered = [records[(kind, seed)] for kind in kinds for seed in seed_list]
    for record in ordered:
        name = f"{record.strategy_kind}_seed{record.seed}.json"
        _write_atomic(output_dir / name, _to_json_bytes(record.to_dict()))

    summary = summarize_runs(ordered)
    _write_atomic(output_dir / "summary.csv", _summary_csv_bytes(summary))

    manifest = RunManifest(
        command="simulate",
        parameters={
            "dataset": dataset.name,
            "strategies": kinds,
            "regime": regime,
            "steps": steps,
            "temperature": temperature,
            "typicality_k": typicality_k,
            "filter_fraction": filter_fraction,
            "typicality_scope": typicality_scope,
            "probcover_radius": probcover_radius,
            "test_fraction": test_fraction,
            "probe_lr": probe_lr,
            "probe_epochs": probe_epochs,
            "probe_l2": probe_l2,
            "normalize": normalize,
        },
        seeds=seed_list,
        dataset_checksum=_sha256(dataset),
    )
    _write_atomic(output_dir / "manifest.json", manifest.to_json_bytes())
    click.echo(f"wrote {len(ordered)} run records to {output_dir}", err=True)


def _worker_count(n_tasks: int) -> int:
    cap = int(os.environ.get("SUPCLUST_THREADS", "0") or "0")
    if cap < 0:
        raise ConfigError("SUPCLUST_THREADS must be >= 0")
    auto = os.cpu_count() or 1
    limit = auto if cap == 0 else cap
    return max(1, min(limit, n_tasks))


def _run_tasks(tasks):
    workers = _worker_count(len(tasks))
    if workers == 1:
        return [_simulate_one(task) for task in tasks]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(_simulate_one, tasks))


def _to_json_bytes(payload: dict) -> bytes:
    return (json.dumps(payload, indent=2, sort_keys=True) + "\n").encode("utf-8")


def _summary_csv_bytes(rows) -> bytes:
    buf = io.StringIO()
    writer = csv.writer(buf)
    writer.writerow(["strategy", "step", "labeled_count", "mean_acc", "stderr_acc"])
    for row in rows:
        writer.writerow([row.strategy, row.step, row.labeled_count, repr(row.mean_acc), repr(row.stderr_acc)])
    return buf.getvalue().encode("utf-8")


_REPORT_METRICS = ("mean_acc", "stderr_acc", "mean_balanced_acc", "stderr_balanced_acc")


@main.command("report")
@click.argument("run_dir", type=click.Path(file_okay=False, path_type=Path))
@click.option("-o", "--output", type=click.Path(dir_okay=False, path_type=Path), default=None, help="Long-format CSV destination (default: RUN_DIR/report.csv).")
@_handle_errors
def cmd_report(run_dir, output):
    """Print a per-strategy accuracy table and emit a plot-ready CSV."""
    records = []
    for path in sorted(run_dir.glob("*.json")):
        if path.name == "manifest.json" or path.name.endswith(".manifest.json"):
            continue
        try:
            payload = json.loads(path.read_text(encoding="utf-8"))
            records.append(ALRunRecord.from_dict(payload))
        except (json.JSONDecodeError, KeyError, TypeError) as exc:
            raise DataFormatError(f"{path}: not a valid run record: {exc}") from None
    if not records:
        raise ConfigError(f"no records found in {run_dir}")

    summary = summarize_runs(records)

    header = ["strategy", "step", "labeled", "mean_acc", "stderr", "balanced_acc"]
    lines = [header] + [
        [
            row.strategy,
            str(row.step),
            str(row.labeled_count),
            f"{row.mean_acc:.4f}",
            f"{row.stderr_acc:.4f}",
            f"{row.mean_balanced_acc:.4f}",
        ]
        for row in summary
    ]
    widths = [max(len(line[i]) for line in lines) for i in range(len(header))]
    for line in lines:
        click.echo("  ".join(field.ljust(width) for field, width in zip(line, widths)))

    buf = io.StringIO()
    writer = csv.writer(buf)
    writer.writerow(["strategy", "step", "labeled_count", "metric", "value"])
    for row in summary:
        values = (row.mean_acc, row.stderr_acc, row.mean_balanced_acc, row.stderr_balanced_acc)
        for metric, value in zip(_REPORT_METRICS, values):
            writer.writerow([row.strategy, row.step, row.labeled_count, metric, repr(value)])
    out_path = output if output is not None else run_dir / "report.csv"
    _write_atomic(out_path, buf.getvalue().encode("utf-8"))


if __name__ == "__main__":
    main()
