import argparse
import logging
import os
import sys

sys.path.insert(0, os.path.dirname(os.path.abspath(__file__)))

import config
from ui.commands import RunConfig, cmd_export, cmd_oracle_check, cmd_run, cmd_validate, cmd_version
from utils.errors import ValidationError
from utils.notifications import setup_logging, show_error

logger = logging.getLogger(__name__)

COMMANDS = {
    "validate": cmd_validate,
    "run": cmd_run,
    "export": cmd_export,
    "oracle-check": cmd_oracle_check,
    "version": cmd_version,
}


def _formats(value: str):
    return tuple(f.strip() for f in value.split(",") if f.strip())


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog=config.APP_NAME,
                                     description="Social network analysis of sociometric questionnaires "
                                                 "over a rule-saturated knowledge base.")
    parser.add_argument("-v", "--verbose", action="count", default=0, help="-v for progress, -vv for debug")
    sub = parser.add_subparsers(dest="command", required=True)

    inputs = argparse.ArgumentParser(add_help=False)
    inputs.add_argument("--questionnaire", default=config.DEFAULT_QUESTIONNAIRE_PATH)
    inputs.add_argument("--responses")
    inputs.add_argument("--rules", default=config.DEFAULT_RULES_PATH)
    inputs.add_argument("--schema", default=config.DEFAULT_SCHEMA_PATH)
    inputs.add_argument("--qpe", help="questionnaire event id")
    inputs.add_argument("--iteration-limit", type=int, default=config.DEFAULT_ITERATION_LIMIT)

    analysis = argparse.ArgumentParser(add_help=False)
    analysis.add_argument("--out", required=True, help="output directory")
    analysis.add_argument("--symmetrize", action="store_true")
    analysis.add_argument("--closeness", default=config.DEFAULT_CLOSENESS, choices=config.CLOSENESS_MODES)
    analysis.add_argument("--eigenvector", default=config.DEFAULT_EIGENVECTOR, choices=config.EIGENVECTOR_MODES)
    analysis.add_argument("--normalize-betweenness", action="store_true")
    analysis.add_argument("--formats", type=_formats, default=config.DEFAULT_FORMATS,
                          help=f"comma separated, from {','.join(config.EXPORT_FORMATS)}")
    analysis.add_argument("--top-k", type=int, default=config.DEFAULT_TOP_K)

    sub.add_parser("validate", parents=[inputs], help="check schema, rules, questionnaire and responses")
    sub.add_parser("run", parents=[inputs, analysis], help="full pipeline with reports and exports")
    sub.add_parser("export", parents=[inputs, analysis], help="pipeline writing graph files only")
    oracle = sub.add_parser("oracle-check", help="compare metrics against brute-force references")
    oracle.add_argument("--seed", type=int, default=1)
    oracle.add_argument("--trials", type=int, default=200)
    sub.add_parser("version")
    return parser


def config_from_args(args: argparse.Namespace) -> RunConfig:
    cfg = RunConfig()
    for attr, name in (("questionnaire_path", "questionnaire"), ("responses_path", "responses"),
                       ("rules_path", "rules"), ("schema_path", "schema"), ("qpe_id", "qpe"),
                       ("output_dir", "out"), ("symmetrize", "symmetrize"), ("closeness", "closeness"),
                       ("eigenvector", "eigenvector"), ("normalize_betweenness", "normalize_betweenness"),
                       ("formats", "formats"), ("top_k", "top_k"), ("seed", "seed"), ("trials", "trials"),
                       ("iteration_limit", "iteration_limit")):
        if hasattr(args, name):
            setattr(cfg, attr, getattr(args, name))
    return cfg


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return 0 if e.code == 0 else 2

    setup_logging(args.verbose)
    cfg = config_from_args(args)
    try:
        return COMMANDS[args.command](cfg)
    except ValidationError as e:
        show_error(str(e))
        return 2
    except Exception as e:
        logger.debug("command failed", exc_info=True)
        show_error(str(e))
        return 3


if __name__ == "__main__":
    sys.exit(main())
