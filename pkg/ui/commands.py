import logging
import os
import shutil
import tempfile
import time
from contextlib import contextmanager
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import config
from database.db import KnowledgeBase
from database.models import load_schema
from logic.findings_logic import build_findings
from logic.metrics_logic import NetworkAnalysis, analyze_network, metrics_report, write_back
from logic.network_logic import build_networks, scan_response_edges
from logic.oracle_logic import format_report, run_oracle_check
from logic.rule_logic import RuleEngine, SaturationStats
from logic.survey_logic import (CompositeScores, IngestionReport, QpeDef, QuestionnaireDef, ResponseRecord,
                                compute_composite_scores, ingest_responses, label_characteristics,
                                load_questionnaire, load_responses)
from utils.errors import ResponseError, RuntimeFailure, ValidationError
from utils.exporters import check_file_stems, write_facts_file, write_network_files
from utils.helpers import ensure_directory_exists, read_text_file, write_json_file
from utils.notifications import show_diagnostics, show_lines, show_success, show_summary

logger = logging.getLogger(__name__)


@dataclass
class RunConfig:
    questionnaire_path: str = config.DEFAULT_QUESTIONNAIRE_PATH
    responses_path: Optional[str] = None
    rules_path: str = config.DEFAULT_RULES_PATH
    schema_path: str = config.DEFAULT_SCHEMA_PATH
    qpe_id: Optional[str] = None
    output_dir: Optional[str] = None
    symmetrize: bool = False
    closeness: str = config.DEFAULT_CLOSENESS
    eigenvector: str = config.DEFAULT_EIGENVECTOR
    normalize_betweenness: bool = False
    formats: Tuple[str, ...] = config.DEFAULT_FORMATS
    top_k: int = config.DEFAULT_TOP_K
    seed: int = 1
    trials: int = 200
    iteration_limit: int = config.DEFAULT_ITERATION_LIMIT

    def validate(self, need_responses: bool = False, need_output: bool = False) -> List[str]:
        """Problems with this configuration; empty when it can run."""
        problems = []
        for label, path in (("schema", self.schema_path), ("rules", self.rules_path),
                            ("questionnaire", self.questionnaire_path)):
            if not path or not os.path.isfile(path):
                problems.append(f"{label} file not found: {path}")
        if need_responses and not self.responses_path:
            problems.append("--responses is required")
        elif self.responses_path and not os.path.isfile(self.responses_path):
            problems.append(f"responses file not found: {self.responses_path}")
        if need_output:
            if not self.output_dir:
                problems.append("--out is required")
            elif os.path.exists(self.output_dir) and not os.path.isdir(self.output_dir):
                problems.append(f"output path is not a directory: {self.output_dir}")
        unknown = [f for f in self.formats if f not in config.EXPORT_FORMATS]
        if unknown:
            problems.append(f"unknown export formats {unknown}; choose from {', '.join(config.EXPORT_FORMATS)}")
        if self.closeness not in config.CLOSENESS_MODES:
            problems.append(f"unknown closeness mode '{self.closeness}'")
        if self.eigenvector not in config.EIGENVECTOR_MODES:
            problems.append(f"unknown eigenvector mode '{self.eigenvector}'")
        if self.top_k < 1:
            problems.append("--top-k must be at least 1")
        if self.iteration_limit < 1:
            problems.append("--iteration-limit must be at least 1")
        return problems


@dataclass
class PipelineResult:
    kb: KnowledgeBase
    qdef: QuestionnaireDef
    qpe: QpeDef
    ingestion: IngestionReport
    saturation: SaturationStats
    composites: CompositeScores
    analyses: List[NetworkAnalysis] = field(default_factory=list)
    timings: Dict[str, float] = field(default_factory=dict)


@contextmanager
def _timed(timings: Dict[str, float], stage: str):
    started = time.perf_counter()
    yield
    timings[stage] = time.perf_counter() - started
    logger.info("stage %s done in %.3fs", stage, timings[stage])


def _require(cfg: RunConfig, **kwargs):
    problems = cfg.validate(**kwargs)
    if problems:
        raise ValidationError("; ".join(problems))


def select_qpe(qdef: QuestionnaireDef, records: Sequence[ResponseRecord], qpe_id: Optional[str] = None) -> QpeDef:
    """The event to analyse: explicit id, else the questionnaire's only event, else the responses' only event."""
    if qpe_id is None:
        if len(qdef.events) == 1:
            qpe_id = qdef.events[0].id
        else:
            found = sorted({r.qpe_id for r in records})
            if len(found) != 1:
                raise ValidationError(f"cannot choose a questionnaire event (found {found or 'none'}); pass --qpe")
            qpe_id = found[0]
    try:
        return qdef.event(qpe_id)
    except KeyError:
        return QpeDef(id=qpe_id, questionnaire_id=qdef.id)


def load_engine(cfg: RunConfig) -> RuleEngine:
    schema = load_schema(read_text_file(cfg.schema_path), source=cfg.schema_path)
    return RuleEngine.from_file(schema, cfg.rules_path, iteration_limit=cfg.iteration_limit)


def run_pipeline(cfg: RunConfig) -> PipelineResult:
    """load -> ingest -> saturate -> characteristics -> networks -> metrics -> write-back."""
    timings: Dict[str, float] = {}
    with _timed(timings, "load"):
        engine = load_engine(cfg)
        engine.validate()
        qdef = load_questionnaire(cfg.questionnaire_path)
        records = load_responses(cfg.responses_path)
        qpe = select_qpe(qdef, records, cfg.qpe_id)

    with _timed(timings, "ingest"):
        kb = KnowledgeBase(engine.schema)
        try:
            ingestion = ingest_responses(kb, qdef, qpe, records)
        except ResponseError as e:
            e.source = e.source or cfg.responses_path
            raise

    with _timed(timings, "saturate"):
        saturation = engine.saturate(kb)

    with _timed(timings, "characteristics"):
        composites = compute_composite_scores(kb, qdef, qpe)
        label_characteristics(kb, qdef)
        ingestion.partial_scores = list(composites.partial)

    with _timed(timings, "networks"):
        networks = build_networks(kb, qpe.id, symmetrize=cfg.symmetrize)
        check_file_stems(networks)

    with _timed(timings, "metrics"):
        analyses = [analyze_network(net, cfg.closeness, cfg.eigenvector, cfg.normalize_betweenness)
                    for net in networks]
        for analysis in analyses:
            write_back(kb, analysis)

    return PipelineResult(kb, qdef, qpe, ingestion, saturation, composites, analyses, timings)


@contextmanager
def _staging(out_dir: str):
    """Yield a scratch directory inside out_dir whose files move into out_dir only on success."""
    ensure_directory_exists(out_dir)
    staging = tempfile.mkdtemp(prefix=".staging-", dir=out_dir)
    try:
        yield staging
        for name in sorted(os.listdir(staging)):
            os.replace(os.path.join(staging, name), os.path.join(out_dir, name))
    finally:
        shutil.rmtree(staging, ignore_errors=True)


def _write_graph_outputs(result: PipelineResult, staging: str, formats: Sequence[str]) -> List[str]:
    written = []
    for analysis in result.analyses:
        written += write_network_files(analysis, staging, formats)
    if "facts" in formats:
        written.append(write_facts_file(result.kb, staging))
    return written


# ----------------------------------------------------------------------
# Commands
# ----------------------------------------------------------------------

def cmd_validate(cfg: RunConfig) -> int:
    _require(cfg)
    engine = load_engine(cfg)
    diagnostics = engine.diagnostics()
    if diagnostics:
        show_diagnostics(diagnostics, source=cfg.rules_path)
        return 2
    qdef = load_questionnaire(cfg.questionnaire_path)

    if cfg.responses_path:
        records = load_responses(cfg.responses_path)
        qpe = select_qpe(qdef, records, cfg.qpe_id)
        kb = KnowledgeBase(engine.schema)
        try:
            ingest_responses(kb, qdef, qpe, records)
        except ResponseError as e:
            e.source = e.source or cfg.responses_path
            raise
        engine.saturate(kb)
        derived = {net.relation_type: net.edges for net in build_networks(kb, qpe.id)}
        scanned = scan_response_edges(qdef, records, qpe.id)
        mismatched = sorted(name for name in scanned if scanned[name] != derived.get(name, set()))
        if mismatched:
            raise RuntimeFailure(f"rule-derived edges differ from the response scan for {mismatched}")

    show_success(f"{cfg.schema_path}, {cfg.rules_path} ({len(engine.ruleset)} rules) and "
                 f"{cfg.questionnaire_path} are valid")
    return 0


def cmd_run(cfg: RunConfig) -> int:
    _require(cfg, need_responses=True, need_output=True)
    started = time.perf_counter()
    result = run_pipeline(cfg)

    with _timed(result.timings, "export"), _staging(cfg.output_dir) as staging:
        ingestion = result.ingestion.to_dict()
        ingestion.update({
            "qpe_id": result.qpe.id,
            "saturation": {"rounds": result.saturation.rounds, "new_facts": result.saturation.new_facts,
                           "per_rule": dict(sorted(result.saturation.per_rule.items()))},
            "facts": len(result.kb),
        })
        write_json_file(os.path.join(staging, "ingestion_report.json"), dict(sorted(ingestion.items())))
        for analysis in result.analyses:
            write_json_file(os.path.join(staging, f"metrics_{analysis.network.file_stem}.json"),
                            metrics_report(analysis))
        findings = build_findings(result.kb, result.qdef, result.qpe.id, result.analyses, cfg.top_k)
        write_json_file(os.path.join(staging, "findings.json"), findings.to_dict())
        _write_graph_outputs(result, staging, cfg.formats)

    show_summary(f"run {result.qpe.id}: {len(result.analyses)} networks, {len(result.kb)} facts -> {cfg.output_dir}",
                 list(result.timings.items()) + [("total", time.perf_counter() - started)])
    return 0


def cmd_export(cfg: RunConfig) -> int:
    _require(cfg, need_responses=True, need_output=True)
    result = run_pipeline(cfg)
    with _staging(cfg.output_dir) as staging:
        written = _write_graph_outputs(result, staging, cfg.formats)
    show_success(f"{len(written)} files written to {cfg.output_dir}")
    return 0


def cmd_oracle_check(cfg: RunConfig, overrides=None) -> int:
    report = run_oracle_check(cfg.seed, cfg.trials, overrides=overrides)
    show_lines(format_report(report))
    show_summary("timing", [("oracle-check", report.elapsed)])
    return 0 if report.passed else 3


def cmd_version(cfg: RunConfig = None) -> int:
    show_lines([f"{config.APP_NAME} {config.APP_VERSION}"])
    return 0
