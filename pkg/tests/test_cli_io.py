import json
import subprocess
import sys

import numpy as np
import pytest

from conftest import make_cohort, make_pupil
from vamod.errors import BadNumber, BadToken, InvalidConfig, SchemaMismatch
from vamod.io import (
    build_run_report,
    load_cohort,
    read_config_file,
    read_scores_csv,
    write_cohort,
    write_config_file,
    write_run_report,
)
from vamod.synth import config_from_items, config_to_items, default_config, generate_cohort


@pytest.fixture(scope="module")
def small_cohort():
    return generate_cohort(default_config(n_schools=15, seed=31))


def write_pair(cohort, tmp_path):
    pupils = tmp_path / "pupils.csv"
    schools = tmp_path / "schools.csv"
    write_cohort(cohort, pupils, schools)
    return pupils, schools


class TestCohortRoundTrip:
    def test_write_read_identity(self, small_cohort, tmp_path):
        pupils, schools = write_pair(small_cohort, tmp_path)
        assert load_cohort(pupils, schools) == small_cohort

    def test_trailing_space_token_rejected(self, small_cohort, tmp_path):
        pupils, schools = write_pair(small_cohort, tmp_path)
        text = pupils.read_text().splitlines()
        first = text[1].split(",")
        first[6] = first[6] + " "
        text[1] = ",".join(first)
        pupils.write_text("\n".join(text) + "\n")
        with pytest.raises(BadToken, match="row 1.*ethnicity"):
            load_cohort(pupils, schools)

    def test_missing_column_named(self, small_cohort, tmp_path):
        pupils, schools = write_pair(small_cohort, tmp_path)
        lines = pupils.read_text().splitlines()
        rows = [line.rsplit(",", 1)[0] for line in lines]
        pupils.write_text("\n".join(rows) + "\n")
        with pytest.raises(SchemaMismatch, match="idaci_decile"):
            load_cohort(pupils, schools)

    def test_reordered_header_rejected(self, small_cohort, tmp_path):
        pupils, schools = write_pair(small_cohort, tmp_path)
        lines = pupils.read_text().splitlines()
        header = lines[0].split(",")
        header[0], header[1] = header[1], header[0]
        lines[0] = ",".join(header)
        pupils.write_text("\n".join(lines) + "\n")
        with pytest.raises(SchemaMismatch, match="column order"):
            load_cohort(pupils, schools)

    def test_short_row_rejected(self, small_cohort, tmp_path):
        pupils, schools = write_pair(small_cohort, tmp_path)
        lines = pupils.read_text().splitlines()
        lines[3] = lines[3].rsplit(",", 1)[0]
        pupils.write_text("\n".join(lines) + "\n")
        with pytest.raises(SchemaMismatch, match="row 3"):
            load_cohort(pupils, schools)

    def test_bad_number(self, small_cohort, tmp_path):
        pupils, schools = write_pair(small_cohort, tmp_path)
        lines = pupils.read_text().splitlines()
        fields = lines[2].split(",")
        fields[2] = "4.6points"
        lines[2] = ",".join(fields)
        pupils.write_text("\n".join(lines) + "\n")
        with pytest.raises(BadNumber, match="row 2.*ks2"):
            load_cohort(pupils, schools)


class TestConfigFile:
    def test_round_trip(self, tmp_path):
        config = default_config(n_schools=10, seed=3)
        path = tmp_path / "synth.cfg"
        write_config_file(config_to_items(config), path)
        assert config_from_items(read_config_file(path)) == config

    def test_comments_and_blanks_skipped(self, tmp_path):
        path = tmp_path / "c.cfg"
        path.write_text("# a comment\n\nn_schools = 8\n seed =  5 \n")
        items = read_config_file(path)
        assert items == {"n_schools": "8", "seed": "5"}

    def test_missing_equals_rejected(self, tmp_path):
        path = tmp_path / "c.cfg"
        path.write_text("n_schools 8\n")
        with pytest.raises(InvalidConfig, match="line 1"):
            read_config_file(path)

    def test_duplicate_key_rejected(self, tmp_path):
        path = tmp_path / "c.cfg"
        path.write_text("seed = 1\nseed = 2\n")
        with pytest.raises(InvalidConfig, match="duplicate"):
            read_config_file(path)


class TestRunReport:
    def test_report_files_and_consistency(self, small_cohort, tmp_path):
        report = build_run_report(small_cohort)
        out = tmp_path / "report"
        written = write_run_report(report, out)
        names = {p.name for p in written}
        assert {"schools.csv", "transitions.csv", "summary.json"} <= names
        assert any(n.startswith("gaps_") for n in names)

        summary = json.loads((out / "summary.json").read_text())
        assert summary["models"]["adjusted"]["r_squared"] >= summary["models"]["base"]["r_squared"]
        assert summary["n_schools"] == small_cohort.n_schools

        lines = (out / "schools.csv").read_text().splitlines()
        assert len(lines) == small_cohort.n_schools + 1
        # row order: descending base score
        scores = [float(line.split(",")[2]) for line in lines[1:]]
        assert scores == sorted(scores, reverse=True)
        # band counts in summary equal CSV tallies
        bands = [line.split(",")[6] for line in lines[1:]]
        for token, count in summary["bands"]["base"].items():
            assert bands.count(token) == count

    def test_transitions_csv_grand_total(self, small_cohort, tmp_path):
        report = build_run_report(small_cohort)
        out = tmp_path / "report"
        write_run_report(report, out)
        last = (out / "transitions.csv").read_text().splitlines()[-1].split(",")
        assert last[0] == "total"
        assert int(last[6]) == small_cohort.n_schools

    def test_deterministic_bytes(self, small_cohort, tmp_path):
        out_a = tmp_path / "a"
        out_b = tmp_path / "b"
        write_run_report(build_run_report(small_cohort), out_a)
        write_run_report(build_run_report(small_cohort), out_b)
        for path in sorted(out_a.iterdir()):
            assert path.read_bytes() == (out_b / path.name).read_bytes()


def run_cli(*args, env=None):
    import os

    full_env = dict(os.environ)
    if env:
        full_env.update(env)
    return subprocess.run(
        [sys.executable, "-m", "vamod", *args],
        capture_output=True,
        text=True,
        env=full_env,
    )


class TestCli:
    def test_validate_ok(self, small_cohort, tmp_path):
        pupils, schools = write_pair(small_cohort, tmp_path)
        proc = run_cli("validate", "--pupils", str(pupils), "--schools", str(schools))
        assert proc.returncode == 0
        assert "ok:" in proc.stdout

    def test_validate_bad_token_exit_1(self, small_cohort, tmp_path):
        pupils, schools = write_pair(small_cohort, tmp_path)
        lines = pupils.read_text().splitlines()
        fields = lines[1].split(",")
        fields[5] = "unknown_gender"
        lines[1] = ",".join(fields)
        pupils.write_text("\n".join(lines) + "\n")
        proc = run_cli("validate", "--pupils", str(pupils), "--schools", str(schools))
        assert proc.returncode == 1
        assert "row 1" in proc.stderr

    def test_usage_error_exit_2(self):
        proc = run_cli("validate", "--pupils", "only.csv")
        assert proc.returncode == 2

    def test_missing_file_exit_1(self, tmp_path):
        proc = run_cli(
            "validate", "--pupils", str(tmp_path / "nope.csv"),
            "--schools", str(tmp_path / "nope2.csv"),
        )
        assert proc.returncode == 1

    def test_synth_with_config_then_run_and_compare(self, tmp_path):
        config = default_config(n_schools=20, seed=13)
        cfg_path = tmp_path / "synth.cfg"
        write_config_file(config_to_items(config), cfg_path)

        data = tmp_path / "data"
        proc = run_cli("synth", "--config", str(cfg_path), "--out", str(data))
        assert proc.returncode == 0, proc.stderr

        report = tmp_path / "report"
        proc = run_cli(
            "run", "--pupils", str(data / "pupils.csv"),
            "--schools", str(data / "schools.csv"), "--out", str(report),
        )
        assert proc.returncode == 0, proc.stderr
        assert (report / "schools.csv").exists()
        assert (report / "summary.json").exists()

        proc = run_cli("compare", "--out", str(report))
        assert proc.returncode == 0, proc.stderr
        assert "pearson" in proc.stdout
        assert (report / "compare.json").exists()

    def test_synth_seed_flag_overrides_config(self, tmp_path):
        config = default_config(n_schools=12, seed=1)
        cfg_path = tmp_path / "synth.cfg"
        write_config_file(config_to_items(config), cfg_path)
        out_a = tmp_path / "a"
        out_b = tmp_path / "b"
        run_cli("synth", "--config", str(cfg_path), "--seed", "9", "--out", str(out_a))
        run_cli("synth", "--config", str(cfg_path), "--seed", "9", "--out", str(out_b))
        assert (out_a / "pupils.csv").read_bytes() == (out_b / "pupils.csv").read_bytes()
        run_cli("synth", "--config", str(cfg_path), "--out", str(out_b))
        assert (out_a / "pupils.csv").read_bytes() != (out_b / "pupils.csv").read_bytes()

    def test_rank_deficient_cohort_exit_3(self, tmp_path):
        # every female pupil is FSM-eligible and vice versa: the adjusted
        # design has two identical columns
        pupils = []
        rng = np.random.default_rng(0)
        for i in range(60):
            female = i % 2 == 0
            pupils.append(
                make_pupil(
                    f"p{i}",
                    school_id=f"S{i % 3}",
                    ks2=float(rng.choice([3.0, 4.0, 5.0])),
                    attainment8=float(rng.uniform(20, 70)),
                    gender="female" if female else "male",
                    fsm="eligible" if female else "not_eligible",
                )
            )
        cohort = make_cohort(pupils)
        paths = write_pair(cohort, tmp_path)
        proc = run_cli(
            "run", "--pupils", str(paths[0]), "--schools", str(paths[1]),
            "--out", str(tmp_path / "r"),
        )
        assert proc.returncode == 3
        assert "linearly dependent" in proc.stderr

    def test_compare_two_score_files(self, tmp_path):
        a = tmp_path / "a.csv"
        b = tmp_path / "b.csv"
        a.write_text(
            "school_id,score,significant\ns1,0.5,true\ns2,0.1,false\ns3,-0.6,true\n"
        )
        b.write_text(
            "school_id,score,significant\ns3,-0.55,true\ns1,0.4,true\ns2,0.0,false\n"
        )
        proc = run_cli("compare", "--scores-a", str(a), "--scores-b", str(b))
        assert proc.returncode == 0, proc.stderr
        assert "pearson" in proc.stdout

    def test_compare_mismatched_schools_exit_1(self, tmp_path):
        a = tmp_path / "a.csv"
        b = tmp_path / "b.csv"
        a.write_text("school_id,score,significant\ns1,0.5,true\ns2,0.1,false\n")
        b.write_text("school_id,score,significant\ns1,0.5,true\nsX,0.1,false\n")
        proc = run_cli("compare", "--scores-a", str(a), "--scores-b", str(b))
        assert proc.returncode == 1

    def test_gaps_subcommand(self, small_cohort, tmp_path):
        pupils, schools = write_pair(small_cohort, tmp_path)
        out = tmp_path / "gaps"
        proc = run_cli(
            "gaps", "--pupils", str(pupils), "--schools", str(schools),
            "--characteristic", "fsm", "--out", str(out),
        )
        assert proc.returncode == 0, proc.stderr
        assert (out / "gaps_fsm.csv").exists()

    def test_gaps_unknown_characteristic_exit_2(self, small_cohort, tmp_path):
        pupils, schools = write_pair(small_cohort, tmp_path)
        proc = run_cli(
            "gaps", "--pupils", str(pupils), "--schools", str(schools),
            "--characteristic", "shoe_size", "--out", str(tmp_path / "g"),
        )
        assert proc.returncode == 2

    def test_scores_csv_reader(self, tmp_path):
        path = tmp_path / "s.csv"
        path.write_text("school_id,score,significant\ns1,0.25,true\ns2,-0.1,false\n")
        ids, scores, sig = read_scores_csv(path)
        assert ids == ["s1", "s2"]
        assert scores.tolist() == [0.25, -0.1]
        assert sig == [True, False]
        path.write_text("school_id,score,significant\ns1,0.25,yes\n")
        with pytest.raises(BadToken):
            read_scores_csv(path)
