"""End-to-end experiment pipeline: dataset -> features -> detectors -> report.

One experiment runs a grid of (detector, feature set) combinations over a
single dataset split.  Per feature set the normalizer is fitted on the
healthy train split only and the windows are computed once, shared by all
detectors.  Per combination the detector is fitted on train windows, the
vote threshold is calibrated on the held-out healthy threshold split, and
metrics are computed on the eval split.

Three entry points share the pipeline: ``run_experiment`` does everything,
``train_experiment`` stops after writing the fitted artifacts, and
``evaluate_experiment`` loads previously written artifacts instead of
fitting, then scores and reports.

Everything written to the output directory is byte-deterministic for a
given config except runtimes.json, which holds the measured wall-clock
seconds per combination and is deliberately kept out of the report files.

Output layout:
    config_resolved.json            full config echo
    report.json / report.txt / report.csv
    runtimes.json                   wall clock per combination (not deterministic)
    timeline_{detector}_{featureset}.csv
    artifacts/{featureset}/normalizer.json
    artifacts/{detector}_{featureset}/model.json|pca.json|iqr.json, threshold.json
"""

from __future__ import annotations

import dataclasses
import json
import time
from dataclasses import dataclass, field
from decimal import ROUND_HALF_UP, Decimal
from enum import Enum
from pathlib import Path
from typing import Dict, List, Optional, Tuple

import numpy as np

from . import baseline, detect
from .dataset import (Dataset, GeneratorConfig, SplitSpec, generate_synthetic,
                      load_dataset, split)
from .errors import ConfigError, PumpwatchError, UsageError
from .models import ArchitectureId, Autoencoder, ModelSpec
from .nn.network import Network
from .nn.train import TrainConfig
from .rng import derive_seed
from .signal import (FEATURE_SET_ORDER, WINDOW_SIZE, FeatureSetId, Normalizer,
                     apply_normalizer, assemble_features, channel_count,
                     fit_normalizer, window)


class DetectorKind(Enum):
    DNN = "dnn"
    LSTM = "lstm"
    CNN = "cnn"
    BM_PCA = "bm_pca"
    BM_IQR = "bm_iqr"

    @property
    def label(self):
        return self.name.replace("_", " ")

    @property
    def is_autoencoder(self):
        return self in (DetectorKind.DNN, DetectorKind.LSTM, DetectorKind.CNN)


@dataclass
class DetectorSpec:
    kind: DetectorKind
    n: int = 150
    cnn_bottleneck: int = 32
    variance_target: float = 0.95
    train: Optional[TrainConfig] = None

    @property
    def file_tag(self):
        return self.kind.value


@dataclass
class ExperimentConfig:
    generate: Optional[GeneratorConfig] = None
    load: Optional[str] = None
    split: SplitSpec = field(default_factory=SplitSpec)
    split_seed: int = 0
    feature_sets: List[FeatureSetId] = field(default_factory=lambda: list(FEATURE_SET_ORDER))
    detectors: List[DetectorSpec] = field(default_factory=list)
    train: TrainConfig = field(default_factory=TrainConfig)
    output_dir: str = "out"

    def validate(self):
        if (self.generate is None) == (self.load is None):
            raise ConfigError("exactly one of generate/load must be set")
        if not self.feature_sets:
            raise ConfigError("at least one feature set is required")
        if not self.detectors:
            raise ConfigError("at least one detector is required")
        if self.generate is not None:
            self.generate.validate()
        self.split.validate()
        self.train.validate()
        for det in self.detectors:
            if det.train is not None:
                det.train.validate()


@dataclass
class TimelineEntry:
    sample_id: int
    timestamp: float
    score: float
    threshold: float
    flagged: bool
    truth: bool
    split: str


@dataclass
class ReportRow:
    detector: DetectorSpec
    feature_set: FeatureSetId
    metrics: detect.Metrics
    threshold: detect.Threshold
    runtime_seconds: float = 0.0


@dataclass
class ExperimentReport:
    rows: List[ReportRow]
    timelines: Dict[Tuple[str, str], List[TimelineEntry]]
    config: dict


def config_from_dict(doc: dict) -> ExperimentConfig:
    """Build an ExperimentConfig from the JSON config-file schema."""
    if not isinstance(doc, dict):
        raise ConfigError("config must be a JSON object")
    cfg = ExperimentConfig()
    known = {"dataset", "split", "feature_sets", "detectors", "train", "output_dir"}
    unknown = set(doc) - known
    if unknown:
        raise ConfigError(f"unknown config keys {sorted(unknown)}")

    dsrc = doc.get("dataset", {})
    if "generate" in dsrc:
        cfg.generate = GeneratorConfig(**dsrc["generate"])
    if "load" in dsrc:
        cfg.load = dsrc["load"]

    sp = dict(doc.get("split", {}))
    cfg.split_seed = int(sp.pop("seed", 0))
    cfg.split = SplitSpec(**sp)

    fsets = doc.get("feature_sets", "all")
    cfg.feature_sets = parse_feature_sets(fsets)

    cfg.detectors = [parse_detector(d) for d in doc.get("detectors", [])]
    cfg.train = TrainConfig(**doc.get("train", {}))
    cfg.output_dir = doc.get("output_dir", "out")
    return cfg


def parse_feature_sets(value) -> List[FeatureSetId]:
    if value == "all":
        return list(FEATURE_SET_ORDER)
    if isinstance(value, str):
        value = [v.strip() for v in value.split(",") if v.strip()]
    out = []
    for name in value:
        try:
            out.append(FeatureSetId[name.upper()])
        except KeyError:
            raise ConfigError(f"unknown feature set {name!r}; choose from "
                              f"{[fs.name for fs in FEATURE_SET_ORDER]}")
    return out


def parse_detector(value) -> DetectorSpec:
    if isinstance(value, str):
        value = {"kind": value}
    try:
        kind = DetectorKind[value["kind"].upper()]
    except KeyError:
        raise ConfigError(f"unknown detector {value.get('kind')!r}; choose from "
                          f"{[d.name for d in DetectorKind]}")
    spec = DetectorSpec(kind=kind)
    for key in ("n", "cnn_bottleneck"):
        if key in value:
            setattr(spec, key, int(value[key]))
    if "variance_target" in value:
        spec.variance_target = float(value["variance_target"])
    if "train" in value and value["train"] is not None:
        spec.train = TrainConfig(**value["train"])
    return spec


def resolved_config_dict(cfg: ExperimentConfig) -> dict:
    def traindict(tc):
        return None if tc is None else dataclasses.asdict(tc)

    return {
        "dataset": ({"generate": dataclasses.asdict(cfg.generate)}
                    if cfg.generate is not None else {"load": cfg.load}),
        "split": {**dataclasses.asdict(cfg.split), "seed": cfg.split_seed},
        "feature_sets": [fs.name for fs in cfg.feature_sets],
        "detectors": [{"kind": d.kind.name, "n": d.n,
                       "cnn_bottleneck": d.cnn_bottleneck,
                       "variance_target": d.variance_target,
                       "train": traindict(d.train)} for d in cfg.detectors],
        "train": traindict(cfg.train),
        "output_dir": str(cfg.output_dir),
    }


def _write_json(obj, path):
    with open(path, "w") as f:
        json.dump(obj, f, sort_keys=True, indent=2)
        f.write("\n")


def _fit_detector(det: DetectorSpec, fs: FeatureSetId, arrays: dict,
                  channels: int, traincfg: TrainConfig, combo_dir: Path):
    """Fit one detector on the train windows; returns a window scorer."""
    combo_seed = derive_seed(traincfg.seed, det.kind.name, fs.name)
    if det.kind.is_autoencoder:
        arch = ArchitectureId[det.kind.name]
        ae = ModelSpec(arch=arch, channels=channels, n=det.n,
                       cnn_bottleneck=det.cnn_bottleneck).build(
                           seed=derive_seed(combo_seed, "init"))
        fitcfg = dataclasses.replace(traincfg, seed=derive_seed(combo_seed, "train"))
        ae.fit(arrays["train"], fitcfg)
        ae.network.save(combo_dir / "model.json")
        return ae.window_errors

    if det.kind is DetectorKind.BM_PCA:
        model = baseline.pca_fit(_flat(arrays["train"]),
                                 variance_target=det.variance_target)
        _write_json({"mean": model.mean.tolist(),
                     "components": model.components.tolist(),
                     "k": model.k,
                     "explained_variance_ratio": model.explained_variance_ratio},
                    combo_dir / "pca.json")
        return lambda arr: baseline.pca_scores(model, _flat(arr))

    model = baseline.iqr_fit(_flat(arrays["train"]), holdout=_flat(arrays["threshold"]))
    _write_json({"means": model.means.tolist(), "iqrs": model.iqrs.tolist(),
                 "ratio_threshold": model.ratio_threshold},
                combo_dir / "iqr.json")
    return lambda arr: baseline.outlier_ratios(model, _flat(arr))


def _flat(arr):
    # Explicit column count: reshape(-1) cannot infer it for zero-length input.
    return arr.reshape(len(arr), int(np.prod(arr.shape[1:])))


def _load_scorer(combo_dir: Path):
    """Rebuild the window scorer from whichever artifact file is present."""
    model_path = combo_dir / "model.json"
    if model_path.exists():
        net = Network.load(model_path)
        first = net.layers[0].spec()
        if first["kind"] == "Dense":
            ae = Autoencoder(ArchitectureId.DNN, net, first["in_dim"] // WINDOW_SIZE)
        elif first["kind"] == "LSTM":
            ae = Autoencoder(ArchitectureId.LSTM, net, first["in_dim"])
        else:
            ae = Autoencoder(ArchitectureId.CNN, net, first["in_channels"])
        return ae.window_errors
    pca_path = combo_dir / "pca.json"
    if pca_path.exists():
        with open(pca_path) as f:
            doc = json.load(f)
        model = baseline.PcaModel(mean=np.asarray(doc["mean"]),
                                  components=np.asarray(doc["components"]),
                                  k=doc["k"],
                                  explained_variance_ratio=doc["explained_variance_ratio"])
        return lambda arr: baseline.pca_scores(model, _flat(arr))
    iqr_path = combo_dir / "iqr.json"
    if iqr_path.exists():
        with open(iqr_path) as f:
            doc = json.load(f)
        model = baseline.IqrModel(means=np.asarray(doc["means"]),
                                  iqrs=np.asarray(doc["iqrs"]),
                                  ratio_threshold=doc["ratio_threshold"])
        return lambda arr: baseline.outlier_ratios(model, _flat(arr))
    raise UsageError(f"no fitted model artifact in {combo_dir}")


def _load_threshold(combo_dir: Path) -> detect.Threshold:
    path = combo_dir / "threshold.json"
    if not path.exists():
        raise UsageError(f"missing threshold artifact {path}")
    with open(path) as f:
        doc = json.load(f)
    return detect.Threshold(**doc)


def _load_normalizer(fs_dir: Path, fs: FeatureSetId) -> Normalizer:
    path = fs_dir / "normalizer.json"
    if not path.exists():
        raise UsageError(f"missing normalizer artifact {path}")
    with open(path) as f:
        doc = json.load(f)
    return Normalizer(mins=np.asarray(doc["mins"]), maxs=np.asarray(doc["maxs"]),
                      feature_set=fs)


def run_experiment(cfg: ExperimentConfig, dataset: Dataset = None) -> ExperimentReport:
    """Fit, evaluate and report the whole grid.

    ``dataset`` overrides the config's dataset source when given (used by
    tests that need to hand in an in-memory dataset).
    """
    return _pipeline(cfg, dataset, do_fit=True, do_eval=True)


def train_experiment(cfg: ExperimentConfig, dataset: Dataset = None) -> None:
    """Fit all combinations and write artifacts; no evaluation or report."""
    _pipeline(cfg, dataset, do_fit=True, do_eval=False)


def evaluate_experiment(cfg: ExperimentConfig, dataset: Dataset = None) -> ExperimentReport:
    """Score and report using artifacts a previous train/run left behind."""
    return _pipeline(cfg, dataset, do_fit=False, do_eval=True)


def _pipeline(cfg, dataset, do_fit, do_eval):
    cfg.validate()
    if dataset is not None:
        ds = dataset
    elif cfg.load is not None:
        ds = load_dataset(cfg.load)
    else:
        ds = generate_synthetic(cfg.generate)
    splits = dict(zip(("train", "threshold", "eval"),
                      split(ds, cfg.split, cfg.split_seed)))

    outdir = Path(cfg.output_dir)
    outdir.mkdir(parents=True, exist_ok=True)
    (outdir / "artifacts").mkdir(exist_ok=True)
    resolved = resolved_config_dict(cfg)
    _write_json(resolved, outdir / "config_resolved.json")

    rows = []
    timelines = {}
    runtimes = {}
    for fs in cfg.feature_sets:
        feats = {name: [assemble_features(s, fs) for s in part]
                 for name, part in splits.items()}
        fs_dir = outdir / "artifacts" / fs.value
        fs_dir.mkdir(parents=True, exist_ok=True)
        if do_fit:
            nz = fit_normalizer(feats["train"])
            _write_json({"feature_set": fs.name, "mins": nz.mins.tolist(),
                         "maxs": nz.maxs.tolist()}, fs_dir / "normalizer.json")
        else:
            nz = _load_normalizer(fs_dir, fs)
        batches = {name: [window(apply_normalizer(nz, fm)) for fm in fms]
                   for name, fms in feats.items()}
        channels = channel_count(fs)
        arrays = {name: (np.concatenate([wb.to_array() for wb in wbs])
                         if wbs else np.zeros((0, channels, WINDOW_SIZE)))
                  for name, wbs in batches.items()}
        counts = {name: [len(wb) for wb in wbs] for name, wbs in batches.items()}

        for det in cfg.detectors:
            started = time.perf_counter()
            combo_tag = f"{det.file_tag}_{fs.value}"
            combo_dir = outdir / "artifacts" / combo_tag
            combo_dir.mkdir(parents=True, exist_ok=True)
            traincfg = det.train or cfg.train
            try:
                if do_fit:
                    scorer = _fit_detector(det, fs, arrays, channels, traincfg,
                                           combo_dir)
                    th = detect.calibrate_threshold(scorer(arrays["threshold"]))
                    _write_json({"value": th.value, "mean": th.mean, "std": th.std,
                                 "calibration_count": th.calibration_count},
                                combo_dir / "threshold.json")
                else:
                    scorer = _load_scorer(combo_dir)
                    th = _load_threshold(combo_dir)
                if not do_eval:
                    runtimes[f"{det.kind.name}/{fs.name}"] = (
                        time.perf_counter() - started)
                    continue
                scores = {name: scorer(arr) for name, arr in arrays.items()}
            except PumpwatchError as e:
                raise type(e)(f"{det.kind.name} on {fs.name}: {e}")

            flags = {}
            entries = []
            for name, part in splits.items():
                per_sample = (np.split(scores[name], np.cumsum(counts[name])[:-1])
                              if counts[name] else [])
                flags[name] = []
                for sample, errs in zip(part, per_sample):
                    score = detect.make_score(sample.sample_id, errs)
                    detect.classify(score, th)
                    flags[name].append(score.is_flagged)
                    entries.append(TimelineEntry(
                        sample_id=sample.sample_id, timestamp=sample.timestamp,
                        score=score.sample_score, threshold=th.value,
                        flagged=score.is_flagged, truth=sample.is_anomaly,
                        split=name))
            entries.sort(key=lambda e: (e.timestamp, e.sample_id))
            metrics = detect.evaluate(flags["eval"],
                                      [s.is_anomaly for s in splits["eval"]])

            runtime = time.perf_counter() - started
            key = (det.kind.name, fs.name)
            timelines[key] = entries
            runtimes[f"{det.kind.name}/{fs.name}"] = runtime
            rows.append(ReportRow(detector=det, feature_set=fs, metrics=metrics,
                                  threshold=th, runtime_seconds=runtime))
            _write_timeline_csv(entries, outdir / f"timeline_{combo_tag}.csv")

    _write_json(runtimes, outdir / "runtimes.json")
    if not do_eval:
        return None
    report = ExperimentReport(rows=rows, timelines=timelines, config=resolved)
    text, csv_text = render_tables(report)
    (outdir / "report.txt").write_text(text)
    (outdir / "report.csv").write_text(csv_text)
    _write_json(_report_dict(report), outdir / "report.json")
    return report


def _report_dict(report: ExperimentReport) -> dict:
    return {"config": report.config,
            "rows": [{"detector": r.detector.kind.name,
                      "feature_set": r.feature_set.name,
                      "metrics": dataclasses.asdict(r.metrics),
                      "threshold": dataclasses.asdict(r.threshold)}
                     for r in report.rows]}


def load_report(path) -> ExperimentReport:
    """Rebuild a renderable report from a saved report.json."""
    with open(path) as f:
        doc = json.load(f)
    rows = [ReportRow(detector=DetectorSpec(kind=DetectorKind[r["detector"]]),
                      feature_set=FeatureSetId[r["feature_set"]],
                      metrics=detect.Metrics(**r["metrics"]),
                      threshold=detect.Threshold(**r["threshold"]))
            for r in doc["rows"]]
    return ExperimentReport(rows=rows, timelines={}, config=doc.get("config", {}))


def _fmt2(v) -> str:
    """Two decimals, ties rounded half up (0.125 -> 0.13)."""
    if not np.isfinite(v):
        return "nan"
    return str(Decimal(repr(float(v))).quantize(Decimal("0.01"), rounding=ROUND_HALF_UP))


def render_tables(report: ExperimentReport):
    """Aligned text tables plus CSV, one block per detector.

    Rows follow the canonical feature-set order; metric columns are Acc.,
    F1, P, R rounded to two decimals half-up, matching the precision used
    in the comparison tables this layout mirrors.
    """
    if not report.rows:
        raise UsageError("cannot render an empty report")
    by_detector = {}
    for row in report.rows:
        by_detector.setdefault(row.detector.kind, []).append(row)

    width = max(len(fs.label) for fs in FEATURE_SET_ORDER) + 2
    text_lines = ["Results of anomaly prediction per feature set and model",
                  "(eval split; accuracy, F1, precision, recall)", ""]
    csv_lines = ["detector,feature_set,accuracy,f1,precision,recall"]
    for kind, rows in by_detector.items():
        ordered = [r for fs in FEATURE_SET_ORDER for r in rows if r.feature_set is fs]
        text_lines.append(f"== {kind.label} ==")
        text_lines.append(f"{'Feature set':<{width}}{'Acc.':>6}{'F1':>6}{'P':>6}{'R':>6}")
        for r in ordered:
            m = r.metrics
            text_lines.append(f"{r.feature_set.label:<{width}}{_fmt2(m.accuracy):>6}"
                              f"{_fmt2(m.f1):>6}{_fmt2(m.precision):>6}{_fmt2(m.recall):>6}")
            csv_lines.append(f"{kind.label},{r.feature_set.label},{_fmt2(m.accuracy)},"
                             f"{_fmt2(m.f1)},{_fmt2(m.precision)},{_fmt2(m.recall)}")
        text_lines.append("")
    return "\n".join(text_lines), "\n".join(csv_lines) + "\n"


def _fmt_float(v) -> str:
    return repr(float(v))


def _write_timeline_csv(entries, path):
    lines = ["sample_id,timestamp,score,threshold,flagged,truth,split"]
    for e in entries:
        lines.append(f"{e.sample_id},{_fmt_float(e.timestamp)},{_fmt_float(e.score)},"
                     f"{_fmt_float(e.threshold)},{str(e.flagged).lower()},"
                     f"{str(e.truth).lower()},{e.split}")
    Path(path).write_text("\n".join(lines) + "\n")


def export_timeline(report: ExperimentReport, path, detector=None, feature_set=None):
    """Write one combination's timeline as CSV, timestamp-ascending.

    With a single-combination report the combination may be omitted.
    """
    if not report.timelines:
        raise UsageError("report has no timeline to export")
    if detector is None and feature_set is None:
        if len(report.timelines) != 1:
            raise UsageError("report has several timelines; "
                             "name a detector and feature set")
        key = next(iter(report.timelines))
    else:
        key = (detector if isinstance(detector, str) else detector.name,
               feature_set if isinstance(feature_set, str) else feature_set.name)
        if key not in report.timelines:
            raise UsageError(f"no timeline for {key}")
    _write_timeline_csv(report.timelines[key], path)
