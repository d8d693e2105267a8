"""Best-effort converters from upstream dataset releases to the normalized record format.

Each dataset gets a ``convert-<dataset> --in <raw dir> --out <file>`` command. Upstream
layouts change between releases; column names are matched against a list of candidates
and unknown labels are passed through for the loader to resolve or reject.
"""

from __future__ import annotations

import argparse
import csv
import json
import re
import sys
from collections import Counter
from pathlib import Path
from typing import Iterable, Iterator

SPLIT_PATTERNS = [("train", "train"), ("dev", "dev"), ("val", "dev"), ("test", "test")]

TEXT_COLUMNS = ["text", "Text", "source_article", "comment", "Snippet", "snippet", "tweet", "Tweet", "sentence"]
LABEL_COLUMNS = ["label", "Label", "updated_label", "fallacy", "Fallacy", "Intended Fallacy", "fallacy_type"]
CONTEXT_COLUMNS = ["title", "Title", "context", "Context", "Dialogue", "topic", "Topic"]

LABEL_MAPS: dict[str, dict[str, str]] = {
    "argotario": {
        "irrelevant authority": "Appeal to False Authority",
        "appeal to emotion": "Appeal to Emotion",
        "no fallacy": "No Fallacy",
    },
    "logic": {
        "fallacy of extension": "Straw Man",
        "fallacy of relevance": "Red Herring",
        "fallacy of credibility": "Doubt Credibility",
        "fallacy of logic": "Fallacy of Converse (Affirming the Consequent)",
        "intentional": "Intentional (Intentionally Wrong Argument)",
        "false causality": "False Causality (Post Hoc Fallacy)",
    },
    "reddit": {
        "appealtoauthority": "Appeal to False Authority",
        "hastygeneralization": "Hasty Generalization",
        "bandwagon": "Ad Populum",
        "blackandwhite": "False Dilemma",
        "black and white": "False Dilemma",
        "slipperyslope": "Slippery Slope",
        "naturalistic": "Appeal to Nature",
        "worseproblem": "Appeal to Worse Problems",
        "worse problem": "Appeal to Worse Problems",
        "tradition": "Appeal to Tradition",
    },
    "elecdeb": {
        "adhominem": "Ad Hominem",
        "appealtoemotion": "Appeal to Emotion",
        "appealtoauthority": "Appeal to False Authority",
        "falsecause": "False Causality (Post Hoc Fallacy)",
        "slipperyslope": "Slippery Slope",
        "slogans": "Slogans",
    },
    "covid": {
        "vagueness": "Equivocation",
        "strawman": "Straw Man",
        "post hoc": "False Causality (Post Hoc Fallacy)",
        "false authority": "Appeal to False Authority",
        "no fallacy": "No Fallacy",
    },
    "mafalda": {},
    "propaganda": {},
}

DISCOURSE_TYPES = {
    "argotario": "dialogue",
    "logic": "text",
    "reddit": "Reddit comment",
    "mafalda": "text",
    "elecdeb": "political debate",
    "propaganda": "news article",
    "covid": "tweet",
}


def split_of(path: Path) -> str:
    name = path.stem.lower()
    for needle, split in SPLIT_PATTERNS:
        if needle in name:
            return split
    return "test"


def map_label(dataset: str, raw: str) -> str:
    key = raw.strip().lower()
    table = LABEL_MAPS.get(dataset, {})
    return table.get(key, table.get(key.replace(" ", ""), raw.strip()))


def pick(row: dict, candidates: list[str]) -> str | None:
    for c in candidates:
        value = row.get(c)
        if value not in (None, ""):
            return str(value)
    return None


def read_rows(path: Path) -> Iterator[dict]:
    if path.suffix == ".jsonl":
        with path.open(encoding="utf-8") as f:
            for line in f:
                if line.strip():
                    yield json.loads(line)
        return
    delimiter = "\t" if path.suffix == ".tsv" else ","
    with path.open(encoding="utf-8", newline="") as f:
        yield from csv.DictReader(f, delimiter=delimiter)


def record(dataset: str, split: str, index: int, target: str, labels: list[str], **extra) -> dict:
    counts = Counter(labels)
    dominant = max(counts, key=lambda label: (counts[label], -labels.index(label)))
    return {
        "id": f"{dataset}:{split}:{index:05d}",
        "dataset": dataset,
        "split": split,
        "discourse_type": DISCOURSE_TYPES[dataset],
        "context_sentences": extra.pop("context_sentences", []),
        "target_index": extra.pop("target_index", None),
        "target_segment": target,
        "gold_labels": labels,
        "dominant_label": dominant,
        "meta": extra,
    }


def convert_tabular(dataset: str, raw_dir: Path) -> list[dict]:
    out: list[dict] = []
    counters: Counter = Counter()
    files = sorted(p for p in raw_dir.rglob("*") if p.suffix in {".csv", ".tsv", ".jsonl"})
    for path in files:
        split = split_of(path)
        for row in read_rows(path):
            text = pick(row, TEXT_COLUMNS)
            label = pick(row, LABEL_COLUMNS)
            if not text or not label:
                continue
            context = pick(row, CONTEXT_COLUMNS)
            sentences: list[str] = []
            if dataset == "argotario":
                sentences = [f"A: {context}"] if context else []
                text = f"B: {text}"
            elif context:
                sentences = [context]
            out.append(
                record(dataset, split, counters[split], text, [map_label(dataset, label)],
                       context_sentences=sentences, source_file=path.name)
            )
            counters[split] += 1
    return out


def convert_mafalda(raw_dir: Path) -> list[dict]:
    """Spans of each text grouped by offsets; every annotation of a span is kept."""
    out: list[dict] = []
    counters: Counter = Counter()
    for path in sorted(raw_dir.rglob("*.jsonl")):
        split = split_of(path)
        for row in read_rows(path):
            text = row.get("text", "")
            spans: dict[tuple[int, int], list[str]] = {}
            for start, end, label in row.get("labels", []):
                spans.setdefault((int(start), int(end)), []).append(map_label("mafalda", label))
            for (start, end), labels in sorted(spans.items()):
                segment = text[start:end].strip()
                if not segment or labels == ["nothing"]:
                    continue
                out.append(
                    record("mafalda", split, counters[split], segment, labels,
                           context_sentences=[text], span=f"{start}-{end}")
                )
                counters[split] += 1
    return out


SENTENCE_END = re.compile(r"(?<=[.!?])\s+")


def convert_propaganda(raw_dir: Path) -> list[dict]:
    """Article text files with `<article>.labels` span tables (article, technique, start, end)."""
    out: list[dict] = []
    counters: Counter = Counter()
    for article in sorted(raw_dir.rglob("article*.txt")):
        split = split_of(article.parent)
        text = article.read_text(encoding="utf-8")
        lines = [ln for ln in text.split("\n")]
        offsets, pos = [], 0
        for ln in lines:
            offsets.append((pos, pos + len(ln)))
            pos += len(ln) + 1
        labels_file = next(iter(sorted(article.parent.glob(article.stem + "*.labels"))), None)
        if labels_file is None:
            continue
        per_line: dict[int, list[str]] = {}
        for row in csv.reader(labels_file.open(encoding="utf-8"), delimiter="\t"):
            if len(row) < 4:
                continue
            technique, start = row[1], int(row[2])
            for i, (b, e) in enumerate(offsets):
                if b <= start <= e:
                    per_line.setdefault(i, []).append(map_label("propaganda", technique.replace("_", " ")))
                    break
        sentences = [ln for ln in lines if ln.strip()]
        index_of = {i: sentences.index(lines[i]) for i in per_line if lines[i].strip()}
        for i, labels in sorted(per_line.items()):
            if i not in index_of:
                continue
            out.append(
                record("propaganda", split, counters[split], lines[i], labels,
                       context_sentences=sentences, target_index=index_of[i], article=article.stem)
            )
            counters[split] += 1
    return out


def convert(dataset: str, raw_dir: Path) -> list[dict]:
    if dataset == "mafalda":
        return convert_mafalda(raw_dir)
    if dataset == "propaganda":
        return convert_propaganda(raw_dir)
    return convert_tabular(dataset, raw_dir)


def write_records(records: Iterable[dict], out: Path) -> int:
    out.parent.mkdir(parents=True, exist_ok=True)
    n = 0
    with out.open("w", encoding="utf-8") as f:
        for r in records:
            f.write(json.dumps(r, ensure_ascii=False) + "\n")
            n += 1
    return n


def main_for(dataset: str, argv: list[str] | None = None) -> int:
    parser = argparse.ArgumentParser(prog=f"convert-{dataset}", description=f"Normalize the raw {dataset} release.")
    parser.add_argument("--in", dest="raw", required=True, type=Path, help="raw release directory")
    parser.add_argument("--out", required=True, type=Path, help="normalized .jsonl file")
    args = parser.parse_args(argv)
    if not args.raw.is_dir():
        parser.error(f"not a directory: {args.raw}")
    n = write_records(convert(dataset, args.raw), args.out)
    print(f"wrote {n} records to {args.out}", file=sys.stderr)
    return 0 if n else 1


def argotario() -> int:
    return main_for("argotario")


def logic() -> int:
    return main_for("logic")


def reddit() -> int:
    return main_for("reddit")


def mafalda() -> int:
    return main_for("mafalda")


def elecdeb() -> int:
    return main_for("elecdeb")


def propaganda() -> int:
    return main_for("propaganda")


def covid() -> int:
    return main_for("covid")
