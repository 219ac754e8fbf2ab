import json

import pytest

from granolaqa.cli import main
from granolaqa.dataset import EntityRef, Prediction, QAExample, write_dataset, write_predictions
from granolaqa.prompts import PromptKind, render_prompt


def vanilla(question):
    return render_prompt(PromptKind.VANILLA, {"question": question})


@pytest.fixture
def small_dataset(tmp_path):
    examples = [
        QAExample(
            id=f"e{i}",
            question=f"question {i}?",
            relation="P19",
            entity=EntityRef(surface=f"entity {i}"),
            answers=((f"gold {i}",), ("coarse",)) if i == 0 else ((f"gold {i}",),),
            popularity=i * 10,
        )
        for i in range(4)
    ]
    path = tmp_path / "dataset.jsonl"
    write_dataset(examples, path)
    return path, examples


def test_stats_command(small_dataset, capsys):
    path, _ = small_dataset
    assert main(["stats", "--dataset", str(path)]) == 0
    payload = json.loads(capsys.readouterr().out)
    assert payload["num_examples"] == 4
    assert payload["num_relations"] == 1


def test_stats_missing_dataset_is_data_error(tmp_path, capsys):
    code = main(["stats", "--dataset", str(tmp_path / "none.jsonl")])
    assert code == 2
    assert "data error" in capsys.readouterr().err


def test_decode_requires_model(small_dataset, tmp_path, capsys):
    path, _ = small_dataset
    code = main(
        ["decode", "--method", "greedy", "--dataset", str(path), "--out", str(tmp_path / "p.jsonl")]
    )
    assert code == 1
    assert "config error" in capsys.readouterr().err


def test_decode_with_mock_llm(small_dataset, tmp_path):
    path, examples = small_dataset
    script = {vanilla(example.question): [example.answers[0][0]] for example in examples}
    script_path = tmp_path / "script.json"
    script_path.write_text(json.dumps(script))
    out = tmp_path / "predictions.jsonl"
    code = main(
        [
            "--mock-llm",
            str(script_path),
            "decode",
            "--method",
            "greedy",
            "--dataset",
            str(path),
            "--out",
            str(out),
        ]
    )
    assert code == 0
    lines = [json.loads(line) for line in out.read_text().splitlines()]
    assert len(lines) == 4
    assert lines[0]["answer"] == "gold 0"


def test_decode_provider_error_exit_code(small_dataset, tmp_path, capsys):
    path, _ = small_dataset
    script_path = tmp_path / "script.json"
    script_path.write_text(json.dumps({}))
    code = main(
        [
            "--mock-llm",
            str(script_path),
            "decode",
            "--method",
            "greedy",
            "--dataset",
            str(path),
            "--out",
            str(tmp_path / "p.jsonl"),
        ]
    )
    assert code == 3
    assert "provider error" in capsys.readouterr().err


def test_eval_command_writes_report(small_dataset, tmp_path, capsys):
    path, examples = small_dataset
    predictions = [
        Prediction(example_id=example.id, method="greedy", answer=example.answers[0][0])
        for example in examples
    ]
    predictions_path = tmp_path / "predictions.jsonl"
    write_predictions(predictions, predictions_path)
    out = tmp_path / "report.json"
    csv_dir = tmp_path / "csv"
    code = main(
        [
            "eval",
            "--dataset",
            str(path),
            "--predictions",
            str(predictions_path),
            "--stratify-by",
            "popularity",
            "--bins",
            "2",
            "--out",
            str(out),
            "--csv-dir",
            str(csv_dir),
        ]
    )
    assert code == 0
    document = json.loads(out.read_text())
    assert document["metrics"]["accuracy_granola"] == 1.0
    assert len(document["metrics"]["strata"]) == 2
    assert (csv_dir / "histogram.csv").exists()
    assert (csv_dir / "strata.csv").exists()


def test_eval_then_report_emits_plot_csvs(small_dataset, tmp_path):
    path, examples = small_dataset
    predictions_path = tmp_path / "predictions.jsonl"
    write_predictions(
        [
            Prediction(example_id=example.id, method="greedy", answer=example.answers[0][0])
            for example in examples
        ],
        predictions_path,
    )
    report_path = tmp_path / "report.json"
    assert (
        main(
            [
                "eval",
                "--dataset",
                str(path),
                "--predictions",
                str(predictions_path),
                "--method",
                "greedy",
                "--stratify-by",
                "popularity",
                "--bins",
                "2",
                "--out",
                str(report_path),
            ]
        )
        == 0
    )
    out_dir = tmp_path / "plots"
    assert main(["report", str(report_path), "--out-dir", str(out_dir)]) == 0
    rows = (out_dir / "accuracy_vs_popularity.csv").read_text().splitlines()
    assert len(rows) == 3
    assert rows[1].startswith("greedy,bin01")


def test_report_requires_popularity_strata(small_dataset, tmp_path, capsys):
    path, examples = small_dataset
    predictions_path = tmp_path / "predictions.jsonl"
    write_predictions(
        [Prediction(example_id=examples[0].id, method="greedy", answer="x")], predictions_path
    )
    report_path = tmp_path / "report.json"
    main(
        [
            "eval",
            "--dataset",
            str(path),
            "--predictions",
            str(predictions_path),
            "--out",
            str(report_path),
        ]
    )
    assert main(["report", str(report_path), "--out-dir", str(tmp_path / "plots")]) == 2


def test_meta_eval_command(small_dataset, tmp_path, capsys):
    path, examples = small_dataset
    predictions_path = tmp_path / "predictions.jsonl"
    write_predictions(
        [
            Prediction(example_id=example.id, method="greedy", answer=example.answers[0][0])
            for example in examples
        ],
        predictions_path,
    )
    out = tmp_path / "meta.json"
    code = main(
        [
            "meta-eval",
            "--dataset",
            str(path),
            "--predictions",
            str(predictions_path),
            "--out",
            str(out),
        ]
    )
    assert code == 0
    document = json.loads(out.read_text())
    assert document["cells"]["both_correct"]["fraction"] == 1.0
    assert document["cells"]["standard_only"]["fraction"] == 0.0


def test_enrich_command_with_fixtures(tmp_path, capsys):
    from granolaqa.prompts import PromptKind, render_prompt

    question = "Where was Fiona Lewis born?"
    input_path = tmp_path / "input.jsonl"
    input_path.write_text(
        json.dumps(
            {
                "id": "fiona",
                "question": question,
                "relation": "P19",
                "entity": {"surface": "Fiona Lewis"},
                "answers": [["Westcliff-on-Sea"]],
            }
        )
        + "\n"
    )
    kg_path = tmp_path / "kg.json"
    kg_path.write_text(
        json.dumps(
            {
                "Fiona Lewis": [
                    {"qid": "Q5447986", "label": "Fiona Lewis", "description": "British actress"}
                ],
                "Westcliff-on-Sea": [
                    {"qid": "Q2004421", "label": "Westcliff-on-Sea", "description": "town in Essex"}
                ],
            }
        )
    )
    judge_q = render_prompt(
        PromptKind.CONSISTENCY_JUDGE, {"question": question, "description": "British actress"}
    )
    judge_a = render_prompt(
        PromptKind.CONSISTENCY_JUDGE, {"question": question, "description": "town in Essex"}
    )
    enrich = render_prompt(
        PromptKind.ENRICHMENT,
        {
            "question": question,
            "answer": "Westcliff-on-Sea",
            "question_description": "British actress",
            "answer_description": "town in Essex",
        },
    )
    script_path = tmp_path / "script.json"
    script_path.write_text(
        json.dumps(
            {
                judge_q: ["Yes"] * 5,
                judge_a: ["Yes"] * 5,
                enrich: ["1:: Westcliff-on-Sea\n2:: Essex\n3:: England"],
            }
        )
    )
    out = tmp_path / "enriched.jsonl"
    code = main(
        [
            "--mock-llm",
            str(script_path),
            "--mock-kg",
            str(kg_path),
            "enrich",
            "--input",
            str(input_path),
            "--output",
            str(out),
        ]
    )
    assert code == 0
    record = json.loads(out.read_text().splitlines()[0])
    assert record["answers"] == [["Westcliff-on-Sea"], ["Essex"], ["England"]]
    report = json.loads(capsys.readouterr().out)
    assert report["rows_out"] == 1


def test_config_file_fills_defaults(small_dataset, tmp_path, capsys):
    path, examples = small_dataset
    predictions_path = tmp_path / "predictions.jsonl"
    write_predictions(
        [
            Prediction(example_id=example.id, method="greedy", answer=example.answers[0][0])
            for example in examples
        ],
        predictions_path,
    )
    config_path = tmp_path / "config.json"
    config_path.write_text(json.dumps({"tau": 0.5, "bins": 2}))
    out = tmp_path / "report.json"
    code = main(
        [
            "--config",
            str(config_path),
            "eval",
            "--dataset",
            str(path),
            "--predictions",
            str(predictions_path),
            "--out",
            str(out),
        ]
    )
    assert code == 0
    document = json.loads(out.read_text())
    assert document["run"]["eval"]["tau"] == 0.5


def test_config_file_does_not_override_explicit_flags(small_dataset, tmp_path):
    path, examples = small_dataset
    predictions_path = tmp_path / "predictions.jsonl"
    write_predictions(
        [Prediction(example_id=examples[0].id, method="greedy", answer="gold 0")],
        predictions_path,
    )
    config_path = tmp_path / "config.json"
    config_path.write_text(json.dumps({"tau": 0.5}))
    out = tmp_path / "report.json"
    main(
        [
            "--config",
            str(config_path),
            "eval",
            "--dataset",
            str(path),
            "--predictions",
            str(predictions_path),
            "--tau",
            "0.9",
            "--out",
            str(out),
        ]
    )
    assert json.loads(out.read_text())["run"]["eval"]["tau"] == 0.9


def test_bad_config_file_is_config_error(small_dataset, tmp_path, capsys):
    path, _ = small_dataset
    config_path = tmp_path / "config.json"
    config_path.write_text("[1, 2]")
    code = main(["--config", str(config_path), "stats", "--dataset", str(path)])
    assert code == 1
