from __future__ import annotations

import json
from pathlib import Path

import pytest

from granolaqa import EntityRef, QAExample, write_dataset

GOLDEN_DIR = Path(__file__).parent / "golden"


@pytest.fixture
def barbican_example() -> QAExample:
    return QAExample(
        id="barbican",
        question="Where is the headquarter of Guildhall School of Music and Drama?",
        relation="P159",
        entity=EntityRef(surface="Guildhall School of Music and Drama"),
        answers=(("Barbican Centre", "The Barbican"), ("London",), ("UK",)),
    )


@pytest.fixture
def fiona_example() -> QAExample:
    return QAExample(
        id="fiona",
        question="Where was Fiona Lewis born?",
        relation="P19",
        entity=EntityRef(surface="Fiona Lewis"),
        answers=(("Westcliff-on-Sea",), ("Essex",), ("England",)),
    )


@pytest.fixture
def dataset_file(tmp_path, barbican_example, fiona_example) -> Path:
    path = tmp_path / "dataset.jsonl"
    write_dataset([barbican_example, fiona_example], path)
    return path


def write_jsonl(path: Path, records: list[dict]) -> Path:
    with open(path, "w", encoding="utf-8") as handle:
        for record in records:
            handle.write(json.dumps(record, ensure_ascii=False) + "\n")
    return path


@pytest.fixture
def jsonl_writer():
    return write_jsonl
