import csv
import io
import os
import re
from typing import Iterable, List, Sequence, Set, Tuple

import networkx as nx

from database.db import KnowledgeBase
from database.models import Entity
from logic.metrics_logic import ActorMetrics, NetworkAnalysis
from logic.network_logic import DerivedNetwork
from utils.errors import ValidationError
from utils.helpers import format_float, write_text_file

GRAPHML_ATTRIBUTES = ("degree", "indegree", "outdegree", "betweenness", "closeness", "eigenvector")

_VERTEX_LINE = re.compile(r'^(\d+)\s+"(.*)"$')
_ARC_LINE = re.compile(r'^(\d+)\s+(\d+)$')


# ----------------------------------------------------------------------
# Pajek
# ----------------------------------------------------------------------

def export_pajek(net: DerivedNetwork) -> str:
    position = {m: i for i, m in enumerate(net.members, start=1)}
    lines = [f"*Vertices {len(net.members)}"]
    lines += [f'{i} "{m.name}"' for m, i in position.items()]
    lines.append("*Arcs")
    lines += [f"{a} {b}" for a, b in sorted((position[s], position[t]) for s, t in net.edges)]
    return "\n".join(lines) + "\n"


def parse_pajek(text: str, source: str = None) -> Tuple[List[Entity], Set[Tuple[Entity, Entity]]]:
    """Members and edges of a file written by export_pajek."""
    lines = text.split("\n")
    if lines and lines[-1] == "":
        lines.pop()
    if not lines or not lines[0].startswith("*Vertices "):
        raise ValidationError("missing *Vertices header", source=source, line=1)
    try:
        n = int(lines[0].split()[1])
    except (IndexError, ValueError):
        raise ValidationError("bad vertex count", source=source, line=1)

    members: List[Entity] = []
    for number, line in enumerate(lines[1:n + 1], start=2):
        match = _VERTEX_LINE.match(line)
        if not match or int(match.group(1)) != number - 1:
            raise ValidationError(f"bad vertex line {line!r}", source=source, line=number)
        members.append(Entity(match.group(2)))

    if len(lines) < n + 2 or lines[n + 1] != "*Arcs":
        raise ValidationError("missing *Arcs section", source=source, line=n + 2)

    edges = set()
    for number, line in enumerate(lines[n + 2:], start=n + 3):
        match = _ARC_LINE.match(line)
        if not match:
            raise ValidationError(f"bad arc line {line!r}", source=source, line=number)
        a, b = int(match.group(1)), int(match.group(2))
        if not (1 <= a <= n and 1 <= b <= n):
            raise ValidationError(f"arc endpoint out of range in {line!r}", source=source, line=number)
        edges.add((members[a - 1], members[b - 1]))
    return members, edges


# ----------------------------------------------------------------------
# GraphML / CSV / facts
# ----------------------------------------------------------------------

def export_graphml(net: DerivedNetwork, actors: Sequence[ActorMetrics]) -> str:
    by_id = {a.id: a for a in actors}
    G = nx.DiGraph()
    for member in net.members:
        actor = by_id[member]
        G.add_node(member.name, **{
            attr: format_float(getattr(actor, attr)) if isinstance(getattr(actor, attr), float)
            else getattr(actor, attr)
            for attr in GRAPHML_ATTRIBUTES
        })
    G.add_edges_from((s.name, t.name) for s, t in net.sorted_edges())
    lines = ['<?xml version="1.0" encoding="utf-8"?>']
    lines += nx.generate_graphml(G)
    return "\n".join(lines) + "\n"


def export_edgelist_csv(net: DerivedNetwork) -> str:
    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator="\n")
    writer.writerow(["source", "target"])
    writer.writerows((s.name, t.name) for s, t in net.sorted_edges())
    return buffer.getvalue()


def export_facts(kb: KnowledgeBase) -> str:
    return "".join(f"{fact}\n" for fact in kb.facts())


# ----------------------------------------------------------------------
# Files
# ----------------------------------------------------------------------

def check_file_stems(networks: Iterable[DerivedNetwork]):
    """Refuse networks whose ids sanitize to the same file name stem."""
    seen = {}
    for net in networks:
        other = seen.setdefault(net.file_stem, net.network_id)
        if other != net.network_id:
            raise ValidationError(f"networks {other} and {net.network_id} both write files named "
                                  f"'{net.file_stem}'")


def graph_file_name(net: DerivedNetwork, fmt: str) -> str:
    return {"pajek": f"{net.file_stem}.net",
            "graphml": f"{net.file_stem}.graphml",
            "csv": f"{net.file_stem}_edges.csv"}[fmt]


def write_network_files(analysis: NetworkAnalysis, out_dir: str, formats: Iterable[str]) -> List[str]:
    net = analysis.network
    writers = {
        "pajek": lambda: export_pajek(net),
        "graphml": lambda: export_graphml(net, analysis.actors),
        "csv": lambda: export_edgelist_csv(net),
    }
    written = []
    for fmt in formats:
        if fmt in writers:
            path = os.path.join(out_dir, graph_file_name(net, fmt))
            write_text_file(path, writers[fmt]())
            written.append(path)
    return written


def write_facts_file(kb: KnowledgeBase, out_dir: str) -> str:
    path = os.path.join(out_dir, "facts.txt")
    write_text_file(path, export_facts(kb))
    return path
