"""
Insomnia Brain-Graph GCN
Command-line orchestration: validate -> preprocess -> run -> export
"""

import argparse
import json
import logging
import re
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import replace
from pathlib import Path
from typing import Callable, Dict, List, Optional, Sequence

import pandas as pd

from config import EXPERIMENTS, SYNTHETIC_MODEL, ConfigError, RunConfig, apply_overrides, graph_cache_key, load_config
from experiments.planner import FoldPlan, make_folds, subject_labels
from experiments.reports import summary_table, write_frame, write_json, write_reports
from experiments.studies import (
    channel_descriptors,
    connectivity_descriptors,
    run_configurations,
    sweep_descriptors,
)
from experiments.synthetic import synth_dataset
from experiments.verifier import ExperimentReport, RunDescriptor
from network.gcn import GcnError, ModelConfig
from network.graph import CHANNELS, BrainGraph, build_graphs, class_mean_connectivity
from network.graph_cache import CacheFormatError, export_json, graphs_to_frame, read_graph_cache, write_graph_cache
from tools.edf_reader import EdfError, ManifestEntry, Recording, load_manifest, load_recording, select_channels, summarize_cohort
from tools.filters import preprocess_recording
from tools.montage import DEFAULT_MONTAGE, Montage
from tools.spectral import clipped_bands
from validators import ConfigValidator, RecordingValidator

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_INVALID = 1
EXIT_IO = 2

CACHE_SUFFIX = ".graphs"


def print_banner():
    """Print welcome banner"""
    banner = """
╔══════════════════════════════════════════════════════════╗
║                                                          ║
║        🧠 Insomnia Brain-Graph GCN 🧠                     ║
║                                                          ║
║   EEG brain networks, graph convolution, subject-level   ║
║                  cross-validation                        ║
║                                                          ║
╚══════════════════════════════════════════════════════════╝
"""
    print(banner)


def print_separator():
    """Print a visual separator"""
    print("\n" + "=" * 60 + "\n")


def load_montage(config: RunConfig) -> Montage:
    if config.data.montage_path is None:
        return DEFAULT_MONTAGE
    return Montage.from_csv(config.data.montage_path)


def cache_path(cache_dir: Path, entry_name: str, key: str) -> Path:
    safe = re.sub(r"[^A-Za-z0-9_.-]", "_", entry_name)
    return Path(cache_dir) / f"{safe}-{key[:16]}{CACHE_SUFFIX}"


def _entry_name(entry: ManifestEntry) -> str:
    return f"{entry.subject_id}-{Path(entry.file_path).stem}"


def prepare_recording(recording: Recording, config: RunConfig) -> Recording:
    """Graph channels only, filtered and resampled to 250 Hz"""
    prepared, _ = preprocess_recording(select_channels(recording, CHANNELS), config.preprocess)
    return prepared


def preprocess_entry(entry: ManifestEntry, config: RunConfig) -> Dict:
    """Build and cache the graphs of one manifest recording; returns its log entry"""
    montage = load_montage(config)
    window = config.experiment.window_seconds
    omit = config.experiment.omit_channel
    use_distance = config.connectivity.use_distance_term

    recording, steps = preprocess_recording(select_channels(load_recording(entry), CHANNELS), config.preprocess)
    graphs = build_graphs(recording, window, config.connectivity, omit_channel=omit, montage=montage)
    key = graph_cache_key(config, window, omit, use_distance)
    path = cache_path(config.data.cache_dir, _entry_name(entry), key)
    write_graph_cache(path, graphs)
    return {
        "subject_id": entry.subject_id,
        "file_path": str(entry.file_path),
        "cache_file": str(path),
        "channels": list(graphs[0].channel_labels),
        "windows": len(graphs),
        "filters": steps,
    }


class GraphStore:
    """Graphs per configuration, read from the cache when present and built (then cached) otherwise"""

    def __init__(self, config: RunConfig, loaders: Dict[str, Callable[[], Recording]],
                 montage: Montage = DEFAULT_MONTAGE, use_cache: bool = True):
        self.config = config
        self.loaders = loaders
        self.montage = montage
        self.use_cache = use_cache
        self._prepared: Dict[str, Recording] = {}

    def recording(self, name: str) -> Recording:
        if name not in self._prepared:
            self._prepared[name] = prepare_recording(self.loaders[name](), self.config)
        return self._prepared[name]

    def __call__(self, descriptor: RunDescriptor) -> List[BrainGraph]:
        connectivity = replace(self.config.connectivity, use_distance_term=descriptor.use_distance_term)
        key = graph_cache_key(self.config, descriptor.window_seconds, descriptor.omitted_channel,
                              descriptor.use_distance_term)
        graphs = []
        for name in sorted(self.loaders):
            path = cache_path(self.config.data.cache_dir, name, key)
            if self.use_cache and path.is_file():
                logger.debug(f"Reading cached graphs {path}")
                graphs.extend(read_graph_cache(path))
                continue
            built = build_graphs(self.recording(name), descriptor.window_seconds, connectivity,
                                 omit_channel=descriptor.omitted_channel, montage=self.montage)
            if self.use_cache:
                write_graph_cache(path, built)
            graphs.extend(built)
        return graphs


def synthetic_model(config: RunConfig) -> ModelConfig:
    """The synthetic preset replaces the training schedule unless [model] was customised"""
    if replace(config.model, seed=0) == ModelConfig():
        return replace(SYNTHETIC_MODEL, seed=config.model.seed)
    return config.model


def cmd_validate(config: RunConfig) -> int:
    print("🔍 Validating configuration...")
    config_ok, _, problems = ConfigValidator().validate_config(config)
    for problem in problems:
        print(f"   ❌ {problem}")
    if config_ok:
        print("✅ Configuration ranges look good")

    if config.data.manifest_path is None or not config_ok:
        return EXIT_OK if config_ok else EXIT_INVALID

    print_separator()
    print(f"📋 Checking recordings in {config.data.manifest_path}...")
    entries = load_manifest(config.data.manifest_path)
    if not entries:
        print("❌ no recordings")
        return EXIT_INVALID
    usable, message, statuses = RecordingValidator().check_manifest(
        entries, CHANNELS, config.experiment.window_seconds
    )
    for status in statuses:
        if status["usable"]:
            print(f"   ✅ {status['subject_id']} ({status['class_label']}): usable")
        else:
            print(f"   ❌ {status['subject_id']} ({status['class_label']}): {status['reason']}")

    kept = [entry for entry, status in zip(entries, statuses) if status["usable"]]
    if kept:
        cohort = summarize_cohort(kept)
        print(f"\n👥 Usable cohort: {cohort['n_subjects']} subjects {cohort['per_class']}")
    if not usable:
        print(f"\n⚠️  {message}")
        return EXIT_INVALID
    return EXIT_OK


def cmd_preprocess(config: RunConfig) -> int:
    ok, message, _ = ConfigValidator().validate_config(config, require_manifest=True)
    if not ok:
        print(f"❌ Invalid configuration: {message}")
        return EXIT_INVALID

    entries = load_manifest(config.data.manifest_path)
    if not entries:
        print("❌ no recordings")
        return EXIT_INVALID
    print(f"⚙️  Preprocessing {len(entries)} recording(s) into {config.data.cache_dir}...")

    log_entries: List[Dict] = []
    failure: Optional[BaseException] = None
    if config.experiment.jobs > 1:
        with ProcessPoolExecutor(max_workers=config.experiment.jobs) as pool:
            futures = [pool.submit(preprocess_entry, entry, config) for entry in entries]
            for future in futures:
                try:
                    log_entries.append(future.result())
                except Exception as e:
                    failure = failure or e
    else:
        for entry in entries:
            try:
                log_entries.append(preprocess_entry(entry, config))
            except Exception as e:
                failure = e
                break

    if failure is not None:
        for item in log_entries:
            Path(item["cache_file"]).unlink(missing_ok=True)
        raise failure

    for item in log_entries:
        print(f"   ✅ {item['subject_id']}: {item['windows']} windows -> {Path(item['cache_file']).name}")
    key = graph_cache_key(config, config.experiment.window_seconds, config.experiment.omit_channel,
                          config.connectivity.use_distance_term)
    log_path = Path(config.data.cache_dir) / f"preprocess-{key[:16]}.json"
    write_json(log_path, {"config": config.to_dict(), "recordings": log_entries})
    print(f"📝 Preprocessing log: {log_path}")
    return EXIT_OK


def _descriptors(config: RunConfig) -> List[RunDescriptor]:
    name = config.experiment.name
    use_distance = config.connectivity.use_distance_term
    if name == "sweep":
        return sweep_descriptors(use_distance_term=use_distance)
    if name == "connectivity":
        return connectivity_descriptors()
    if name == "channels":
        return channel_descriptors(use_distance_term=use_distance)
    return [RunDescriptor(config.experiment.window_seconds, use_distance, config.experiment.omit_channel)]


def _metadata(config: RunConfig, plan: FoldPlan, model_config: ModelConfig, partial: bool, extra: Dict) -> Dict:
    return {
        "config": config.to_dict(),
        "model": model_config.to_dict(),
        "fold_plan": plan.to_dict(),
        "iterations": "fold assignments fixed, training seed and shuffling reseeded per iteration",
        "clipped_bands": clipped_bands(config.preprocess.target_rate),
        "partial": partial,
        **extra,
    }


def cmd_run(config: RunConfig) -> int:
    name = config.experiment.name
    ok, message, _ = ConfigValidator().validate_config(config, require_manifest=name != "synthetic")
    if not ok:
        print(f"❌ Invalid configuration: {message}")
        return EXIT_INVALID
    montage = load_montage(config)

    if name == "synthetic":
        print(f"🧪 Generating synthetic cohort ({config.experiment.subjects_per_class} subjects/class)...")
        recordings = synth_dataset(config.experiment.subjects_per_class, config.experiment.duration,
                                   seed=config.experiment.seed)
        labels = subject_labels(recordings)
        loaders = {r.subject_id: (lambda r=r: r) for r in recordings}
        store = GraphStore(config, loaders, montage, use_cache=False)
        model_config = synthetic_model(config)
        extra = {"synthetic": {"subjects_per_class": config.experiment.subjects_per_class,
                               "duration": config.experiment.duration}}
    else:
        entries = load_manifest(config.data.manifest_path)
        if not entries:
            print("❌ no recordings")
            return EXIT_INVALID
        labels = {entry.subject_id: entry.class_label for entry in entries}
        loaders = {_entry_name(entry): (lambda entry=entry: load_recording(entry)) for entry in entries}
        store = GraphStore(config, loaders, montage)
        model_config = config.model
        extra = {"cohort": summarize_cohort(entries)}

    plan = make_folds(labels, config.experiment.seed, config.experiment.n_folds)
    descriptors = _descriptors(config)
    output_dir = Path(config.data.output_dir) / name
    checkpoint_dir = output_dir / "checkpoints"
    extra = {**extra, "checkpoint_dir": str(checkpoint_dir)}
    print(f"🚀 Running '{name}': {len(descriptors)} configuration(s) x {plan.n_folds * len(plan.iteration_seeds)} runs")

    reports: List[ExperimentReport] = []
    try:
        run_configurations(descriptors, store, model_config, plan, config.experiment.jobs, completed=reports,
                           checkpoint_dir=checkpoint_dir)
    except Exception:
        if reports:
            write_reports(output_dir, name, reports, _metadata(config, plan, model_config, True, extra))
            print(f"⚠️  Partial reports ({len(reports)} of {len(descriptors)}) written to {output_dir}")
        raise

    paths = write_reports(output_dir, name, reports, _metadata(config, plan, model_config, False, extra))
    print_separator()
    print("📊 RESULTS\n")
    print(summary_table(reports))
    print(f"\n📁 Reports written to {paths['summary'].parent}")

    if name == "synthetic":
        gate = config.experiment.accuracy_gate
        report = reports[0]
        passed = report.window_accuracy >= gate and report.subject_accuracy >= gate
        if not passed:
            print(f"\n❌ Synthetic gate failed: window {report.window_accuracy:.3f}, "
                  f"subject {report.subject_accuracy:.3f} (need >= {gate})")
            return EXIT_INVALID
        print(f"\n✅ Synthetic gate passed (>= {gate})")
    return EXIT_OK


def class_mean_frame(graphs: Sequence[BrainGraph]) -> pd.DataFrame:
    """Long-format class-mean connectivity, one block per channel set"""
    groups: Dict[tuple, List[BrainGraph]] = {}
    for graph in graphs:
        groups.setdefault(graph.channel_labels, []).append(graph)
    rows = []
    for labels, members in groups.items():
        for class_label, matrix in class_mean_connectivity(members).items():
            for i, a in enumerate(labels):
                for j, b in enumerate(labels):
                    rows.append({"class_label": class_label, "channel_a": a, "channel_b": b,
                                 "connectivity": matrix[i, j]})
    return pd.DataFrame(rows, columns=["class_label", "channel_a", "channel_b", "connectivity"])


def cmd_export(config: RunConfig, fmt: str) -> int:
    cache_dir = Path(config.data.cache_dir)
    files = sorted(cache_dir.glob(f"*{CACHE_SUFFIX}"))
    if not files:
        print(f"❌ No graph caches in {cache_dir}")
        return EXIT_INVALID
    export_dir = Path(config.data.output_dir) / "export"
    everything: List[BrainGraph] = []
    for path in files:
        graphs = read_graph_cache(path)
        everything.extend(graphs)
        target = export_dir / f"{path.stem}.{fmt}"
        if fmt == "json":
            export_json(target, graphs)
        else:
            write_frame(target, graphs_to_frame(graphs))
        print(f"   ✅ {path.name} -> {target.name} ({len(graphs)} graphs)")
    write_frame(export_dir / "class_mean_connectivity.csv", class_mean_frame(everything))
    print(f"📁 Exported {len(files)} cache file(s) to {export_dir}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="INI config file")
    common.add_argument("--manifest", help="Recording manifest CSV")
    common.add_argument("--output-dir", help="Report directory (default $EEG_GCN_OUTPUT_DIR or ./results)")
    common.add_argument("--cache-dir", help="Graph cache directory (default $EEG_GCN_CACHE_DIR or ./.graph_cache)")
    common.add_argument("--jobs", type=int, help="Parallel worker processes")
    common.add_argument("--seed", type=int, help="Seed for folds, iterations and model initialization")
    common.add_argument("--window", type=float, help="Window length in seconds")
    common.add_argument("--omit-channel", help="Channel left out of the brain graphs")
    common.add_argument("--no-distance", action="store_true", help="Coherence-only connectivity")
    common.add_argument("--verbose", action="store_true", help="Debug logging")

    parser = argparse.ArgumentParser(prog="eeg-gcn", description="Insomnia classification from EEG brain graphs")
    commands = parser.add_subparsers(dest="command", required=True)
    commands.add_parser("validate", parents=[common], help="Check config, manifest and recordings")
    commands.add_parser("preprocess", parents=[common], help="Build and cache brain graphs")
    run = commands.add_parser("run", parents=[common], help="Run an experiment")
    run.add_argument("--experiment", choices=EXPERIMENTS, help="Experiment to run")
    run.add_argument("--subjects-per-class", type=int, help="Synthetic cohort size per class")
    run.add_argument("--duration", type=float, help="Synthetic recording length in seconds")
    export = commands.add_parser("export", parents=[common], help="Export graph caches")
    export.add_argument("--format", choices=("csv", "json"), default="csv")
    return parser


def resolve_config(args: argparse.Namespace) -> RunConfig:
    config = load_config(args.config)
    return apply_overrides(
        config,
        manifest=args.manifest,
        output_dir=args.output_dir,
        cache_dir=args.cache_dir,
        experiment=getattr(args, "experiment", None),
        window=args.window,
        omit_channel=args.omit_channel,
        no_distance=args.no_distance,
        seed=args.seed,
        jobs=args.jobs,
        subjects_per_class=getattr(args, "subjects_per_class", None),
        duration=getattr(args, "duration", None),
    )


def main(argv: Optional[Sequence[str]] = None) -> int:
    """Main orchestration function"""
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.DEBUG if args.verbose else logging.WARNING,
        format="%(asctime)s %(levelname)s %(name)s: %(message)s",
    )
    print_banner()
    try:
        config = resolve_config(args)
        if args.command == "validate":
            return cmd_validate(config)
        if args.command == "preprocess":
            return cmd_preprocess(config)
        if args.command == "run":
            return cmd_run(config)
        return cmd_export(config, args.format)
    except (ConfigError, EdfError, CacheFormatError, OSError, json.JSONDecodeError) as e:
        print(f"❌ {type(e).__name__}: {e}")
        return EXIT_IO
    except (ValueError, GcnError) as e:
        print(f"❌ {type(e).__name__}: {e}")
        return EXIT_INVALID


if __name__ == "__main__":
    try:
        sys.exit(main())
    except KeyboardInterrupt:
        print("\n\n👋 Interrupted")
        sys.exit(1)
