import subprocess
import sys
from pathlib import Path

from coverbench.cli import main

from conftest import FIXTURE_DIR

INPUTS = FIXTURE_DIR / "inputs"
GOLDEN = FIXTURE_DIR / "golden"


def run_pipeline(out: Path, with_config=False) -> None:
    base = ["--config", str(INPUTS / "config.toml")] if with_config else []
    assert main(base + [
        "queries", "--seed", str(INPUTS / "seed"),
        "--suggestions", str(INPUTS / "suggestions.tsv"),
        "--out", str(out / "queries.tsv"),
    ]) == 0
    assert main(base + [
        "ingest", "--crawl", str(INPUTS / "crawl.jsonl"),
        "--queries", str(out / "queries.tsv"),
        "--out", str(out / "candidates.tsv"),
    ]) == 0
    assert main(base + [
        "score", "--seed", str(INPUTS / "seed"),
        "--candidates", str(out / "candidates.tsv"),
        "--embeddings-matrix", str(INPUTS / "emb.f32"),
        "--embeddings-index", str(INPUTS / "emb.idx"),
        "--out", str(out / "scores.tsv"),
    ]) == 0
    assert main(base + [
        "sample", "--scores", str(out / "scores.tsv"),
        "--k", "3", "--out", str(out / "sampled.tsv"),
    ]) == 0
    assert main(base + [
        "hits", "--sampled", str(out / "sampled.tsv"),
        "--seed", str(INPUTS / "seed"),
        "--rng-seed", "7", "--out", str(out / "hits.csv"),
    ]) == 0
    assert main(base + [
        "votes", "--hits", str(out / "hits.csv"),
        "--assignments", str(INPUTS / "assignments.csv"),
        "--seed", str(INPUTS / "seed"),
        "--overrides", str(INPUTS / "overrides.tsv"),
        "--out", str(out / "votes.tsv"),
    ]) == 0
    assert main(base + [
        "benchmark", "--votes", str(out / "votes.tsv"),
        "--sampled", str(out / "sampled.tsv"),
        "--candidates", str(out / "candidates.tsv"),
        "--seed", str(INPUTS / "seed"),
        "--curation", str(INPUTS / "curation.tsv"),
        "--queries-from", str(out / "hits.csv"),
        "--exclude", str(INPUTS / "exclusions.txt"),
        "--variant", "yt2q",
        "--labels-out", str(out / "labels.tsv"),
        "--out", str(out / "benchmark.tsv"),
    ]) == 0
    assert main(base + [
        "eval", "--benchmark", str(out / "benchmark.tsv"),
        "--embeddings-matrix", str(INPUTS / "emb.f32"),
        "--embeddings-index", str(INPUTS / "emb.idx"),
        "--labels", str(out / "labels.tsv"),
        "--report-json", str(out / "report.json"),
        "--report-md", str(out / "report.md"),
    ]) == 0


GOLDEN_FILES = [
    "queries.tsv",
    "candidates.tsv",
    "scores.tsv",
    "sampled.tsv",
    "hits.csv",
    "votes.tsv",
    "benchmark.tsv",
    "labels.tsv",
    "report.json",
    "report.md",
]


class TestEndToEnd:
    def test_pipeline_reproduces_golden_files(self, tmp_path):
        run_pipeline(tmp_path)
        for name in GOLDEN_FILES:
            assert (tmp_path / name).read_bytes() == (GOLDEN / name).read_bytes(), name

    def test_rerun_is_byte_identical(self, tmp_path):
        first = tmp_path / "first"
        second = tmp_path / "second"
        first.mkdir(), second.mkdir()
        run_pipeline(first)
        run_pipeline(second)
        for name in GOLDEN_FILES:
            assert (first / name).read_bytes() == (second / name).read_bytes(), name

    def test_config_file_supplies_defaults(self, tmp_path):
        run_pipeline(tmp_path, with_config=True)
        assert (tmp_path / "votes.tsv").read_bytes() == (GOLDEN / "votes.tsv").read_bytes()

    def test_config_paths_replace_input_flags(self, tmp_path):
        cfg = tmp_path / "cfg.toml"
        cfg.write_text(
            "[paths]\n"
            f'seed = "{INPUTS / "seed"}"\n'
            f'hits = "{GOLDEN / "hits.csv"}"\n'
            f'assignments = "{INPUTS / "assignments.csv"}"\n'
            f'overrides = "{INPUTS / "overrides.tsv"}"\n'
        )
        assert main([
            "--config", str(cfg),
            "votes", "--out", str(tmp_path / "votes.tsv"),
        ]) == 0
        assert (tmp_path / "votes.tsv").read_bytes() == (GOLDEN / "votes.tsv").read_bytes()

    def test_missing_path_names_flag_and_config_key(self, tmp_path, capsys):
        code = main(["votes", "--out", str(tmp_path / "votes.tsv")])
        assert code == 3
        err = capsys.readouterr().err
        assert "--seed" in err and "paths" in err

    def test_inputs_unchanged_by_pipeline(self, tmp_path):
        snapshot = {
            p.name: p.read_bytes() for p in INPUTS.iterdir() if p.is_file()
        }
        run_pipeline(tmp_path)
        for name, data in snapshot.items():
            assert (INPUTS / name).read_bytes() == data, name


class TestCliErrors:
    def test_missing_input_exit_3(self, tmp_path, capsys):
        code = main([
            "sample", "--scores", str(tmp_path / "nope.tsv"),
            "--out", str(tmp_path / "out.tsv"),
        ])
        assert code == 3
        assert "error:" in capsys.readouterr().err

    def test_schema_error_exit_4(self, tmp_path):
        bad = tmp_path / "bad.tsv"
        bad.write_text("not\ta\tscores\theader\nrow\t1\t2\t3\n")
        code = main(["sample", "--scores", str(bad), "--out", str(tmp_path / "o.tsv")])
        assert code == 4

    def test_eval_id_mismatch_exit_5_no_partial_report(self, tmp_path):
        code = main([
            "eval", "--benchmark", str(GOLDEN / "benchmark.tsv"),
            "--sims", f"wrong={INPUTS / 'emb.f32'},{INPUTS / 'emb.idx'}",
            "--report-json", str(tmp_path / "report.json"),
            "--report-md", str(tmp_path / "report.md"),
        ])
        assert code in (4, 5)
        assert not (tmp_path / "report.json").exists()
        assert not (tmp_path / "report.md").exists()

    def test_config_violation_exit_6(self, tmp_path):
        code = main([
            "sample", "--scores", str(GOLDEN / "scores.tsv"),
            "--k", "0", "--out", str(tmp_path / "o.tsv"),
        ])
        assert code == 6

    def test_bad_config_file(self, tmp_path):
        cfg = tmp_path / "cfg.toml"
        cfg.write_text("vote_threshold = -3\n")
        code = main([
            "--config", str(cfg),
            "sample", "--scores", str(GOLDEN / "scores.tsv"),
            "--out", str(tmp_path / "o.tsv"),
        ])
        assert code == 6

    def test_unknown_config_key(self, tmp_path):
        cfg = tmp_path / "cfg.toml"
        cfg.write_text("votes_threshold = 3\n")
        code = main([
            "--config", str(cfg),
            "sample", "--scores", str(GOLDEN / "scores.tsv"),
            "--out", str(tmp_path / "o.tsv"),
        ])
        assert code == 6

    def test_flag_overrides_config(self, tmp_path, capsys):
        cfg = tmp_path / "cfg.toml"
        cfg.write_text("k_per_group = 2\n")
        code = main([
            "--config", str(cfg),
            "sample", "--scores", str(GOLDEN / "scores.tsv"),
            "--k", "1",
            "--out", str(tmp_path / "o.tsv"),
        ])
        assert code == 0
        assert "(k=1)" in capsys.readouterr().out

    def test_sample_k_flag_limits_rows(self, tmp_path):
        assert main([
            "sample", "--scores", str(GOLDEN / "scores.tsv"),
            "--k", "3", "--out", str(tmp_path / "s.tsv"),
        ]) == 0
        rows = (tmp_path / "s.tsv").read_text().splitlines()[1:]
        per_work: dict[str, int] = {}
        for row in rows:
            work = row.split("\t")[0]
            per_work[work] = per_work.get(work, 0) + 1
        assert all(n <= 9 for n in per_work.values())


class TestMatcherCommand:
    def test_external_matcher_cli(self, tmp_path):
        stub = (
            f"{sys.executable} -c \""
            "import sys; rows = sys.stdin.read().splitlines()[1:]; "
            "print('\\n'.join('0.5' for _ in rows))\""
        )
        assert main([
            "score", "--seed", str(INPUTS / "seed"),
            "--candidates", str(GOLDEN / "candidates.tsv"),
            "--embeddings-matrix", str(INPUTS / "emb.f32"),
            "--embeddings-index", str(INPUTS / "emb.idx"),
            "--matcher-cmd", stub,
            "--out", str(tmp_path / "scores.tsv"),
        ]) == 0
        rows = (tmp_path / "scores.tsv").read_text().splitlines()[1:]
        assert rows and all(row.split("\t")[3] == "0.5" for row in rows)

    def test_matcher_failure_exit_8(self, tmp_path):
        code = main([
            "score", "--seed", str(INPUTS / "seed"),
            "--candidates", str(GOLDEN / "candidates.tsv"),
            "--embeddings-matrix", str(INPUTS / "emb.f32"),
            "--embeddings-index", str(INPUTS / "emb.idx"),
            "--matcher-cmd", f"{sys.executable} -c 'import sys; sys.exit(2)'",
            "--out", str(tmp_path / "scores.tsv"),
        ])
        assert code == 8


def test_console_entry_point_help():
    proc = subprocess.run(
        [sys.executable, "-m", "coverbench", "--help"],
        capture_output=True,
        text=True,
    )
    assert proc.returncode == 0
    assert "exit codes" in proc.stdout
    for command in ("ingest", "score", "sample", "hits", "votes", "benchmark", "eval", "serve"):
        assert command in proc.stdout


class TestIngestErrors:
    def test_unknown_originating_query_exit_5(self, tmp_path, capsys):
        crawl = tmp_path / "crawl.jsonl"
        crawl.write_text(
            '{"video_id": "v1", "title": "t", "channel": "c", "duration_s": 100, '
            '"originating_query": "unmapped query"}\n'
        )
        queries = tmp_path / "queries.tsv"
        queries.write_text("work_id\tquery\nw1\tsome other query\n")
        code = main([
            "ingest", "--crawl", str(crawl), "--queries", str(queries),
            "--out", str(tmp_path / "c.tsv"),
        ])
        assert code == 5
        assert "unmapped query" in capsys.readouterr().err

    def test_malformed_crawl_exit_4(self, tmp_path):
        crawl = tmp_path / "crawl.jsonl"
        crawl.write_text("{broken\n")
        queries = tmp_path / "queries.tsv"
        queries.write_text("work_id\tquery\n")
        code = main([
            "ingest", "--crawl", str(crawl), "--queries", str(queries),
            "--out", str(tmp_path / "c.tsv"),
        ])
        assert code == 4


class TestBenchmarkVariants:
    def run_variant(self, tmp_path, variant, name):
        out = tmp_path / f"benchmark_{name}.tsv"
        code = main([
            "benchmark", "--votes", str(GOLDEN / "votes.tsv"),
            "--sampled", str(GOLDEN / "sampled.tsv"),
            "--candidates", str(GOLDEN / "candidates.tsv"),
            "--seed", str(INPUTS / "seed"),
            "--curation", str(INPUTS / "curation.tsv"),
            "--queries-from", str(GOLDEN / "hits.csv"),
            "--variant", variant,
            "--out", str(out),
        ])
        assert code == 0
        return out.read_text().splitlines()[1:]

    def test_variant_sizes_nest(self, tmp_path):
        custom = self.run_variant(tmp_path, "custom", "custom")
        two_q = self.run_variant(tmp_path, "yt2q", "two_q")
        all_q = self.run_variant(tmp_path, "yt_all_q", "all_q")
        assert len(custom) < len(two_q) < len(all_q)
        # candidates with decided labels: identical across variants
        def candidate_keys(rows):
            return {
                tuple(r.split("\t")[:3]) for r in rows if "\tweb_candidate\t" in r
            }
        assert candidate_keys(custom) == candidate_keys(two_q) == candidate_keys(all_q)

    def test_yt2q_adds_at_most_two_seed_versions_per_work(self, tmp_path):
        rows = self.run_variant(tmp_path, "yt2q", "bound")
        per_work: dict[str, int] = {}
        for row in rows:
            cells = row.split("\t")
            if cells[8] == "seed":
                per_work[cells[0]] = per_work.get(cells[0], 0) + 1
        assert per_work and all(1 <= n <= 2 for n in per_work.values())

    def test_all_q_includes_every_seed_version(self, tmp_path):
        rows = self.run_variant(tmp_path, "yt_all_q", "all")
        seed_rows = [r for r in rows if r.split("\t")[8] == "seed"]
        from coverbench.store import read_versions

        seed_versions = read_versions(INPUTS / "seed" / "versions.tsv")
        assert len(seed_rows) == len(seed_versions)


def test_fixture_generator_self_consistent_at_alternative_seed(tmp_path):
    # regenerating a corpus at a different master seed runs the whole
    # generator + pipeline and the generator's internal vote-oracle
    # assertion on fresh data, so nothing depends on the committed seed
    script = Path(__file__).parent.parent / "scripts" / "make_fixture.py"
    proc = subprocess.run(
        [sys.executable, str(script), str(tmp_path / "alt"), "20260101"],
        capture_output=True,
        text=True,
    )
    assert proc.returncode == 0, proc.stderr
    assert (tmp_path / "alt" / "golden" / "report.json").exists()
    assert "fixture written" in proc.stdout
