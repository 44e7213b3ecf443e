import shutil
import subprocess
import sys
import threading
import time
from pathlib import Path

from simbus.cli import main
from simbus.codec import CanFrame

DATA = Path(__file__).resolve().parent / "data"


def run_cli(*args, timeout=30):
    return subprocess.run(
        [sys.executable, "-m", "simbus", *args],
        capture_output=True, text=True, timeout=timeout,
    )


class TestHelp:
    def test_top_level_help_lists_subcommands(self):
        proc = run_cli("--help")
        assert proc.returncode == 0
        assert "label-tests" in proc.stdout
        assert "monitor" in proc.stdout

    def test_label_tests_help_lists_options(self):
        proc = run_cli("label-tests", "--help")
        assert proc.returncode == 0
        for flag in ("--tests", "--rf", "--oob", "--max-speed", "--canbus",
                     "--can-dbc", "--can-dbc-map", "--can-interface",
                     "--can-channel", "--can-bitrate", "--influxdb-bucket",
                     "--influxdb-org", "-c"):
            assert flag in proc.stdout

    def test_no_arguments_exits_two(self):
        proc = run_cli()
        assert proc.returncode == 2


class TestLabelTestsCommand:
    def test_exit_zero_on_pass(self, tmp_path, scenarios_dir):
        only = tmp_path / "only"
        only.mkdir()
        shutil.copy(scenarios_dir / "straight.yaml", only / "straight.yaml")
        code = main(["label-tests", "--tests", str(only),
                     "--report", str(tmp_path / "r.csv"), "--no-plots"])
        assert code == 0

    def test_exit_one_on_failure(self, tmp_path, scenarios_dir):
        code = main(["label-tests", "--tests", str(scenarios_dir),
                     "--report", str(tmp_path / "r.csv"), "--no-plots"])
        assert code == 1

    def test_exit_two_on_bad_config(self, tmp_path):
        code = main(["label-tests", "--tests", str(tmp_path / "missing"),
                     "--report", str(tmp_path / "r.csv"), "--no-plots"])
        assert code == 2

    def test_config_file_dispatch(self, tmp_path, scenarios_dir):
        config = tmp_path / "run.yml"
        config.write_text(
            "command: 'label-tests'\n"
            "options:\n"
            f"  tests: '{scenarios_dir}'\n"
            f"  report: '{tmp_path / 'r.csv'}'\n"
            "  plots: false\n"
        )
        assert main(["-c", str(config)]) == 1  # hairpin fails
        assert (tmp_path / "r.csv").exists()

    def test_flag_overrides_config(self, tmp_path, scenarios_dir):
        only = tmp_path / "only"
        only.mkdir()
        shutil.copy(scenarios_dir / "hairpin.yaml", only / "hairpin.yaml")
        config = tmp_path / "run.yml"
        config.write_text(
            "command: 'label-tests'\n"
            "options:\n"
            f"  tests: '{only}'\n"
            f"  report: '{tmp_path / 'r.csv'}'\n"
            "  plots: false\n"
            "  oob: 0.3\n"
        )
        # raising the tolerance above the hairpin's worst excursion flips it
        assert main(["label-tests", "-c", str(config), "--oob", "0.9"]) == 0

    def test_unknown_command_in_config(self, tmp_path):
        config = tmp_path / "run.yml"
        config.write_text("command: 'fly-tests'\noptions: {}\n")
        assert main(["-c", str(config)]) == 2


class TestMonitorCommand:
    def test_no_traffic_exit_two(self):
        code = main(["monitor", "--channel", "inproc:cli-quiet",
                     "--dbc", str(DATA / "sample.dbc"), "--timeout", "0.3"])
        assert code == 2

    def test_expectation_failure_exit_one(self):
        from simbus.wire import InprocSender

        def feed():
            time.sleep(0.3)
            tx = InprocSender("cli-feed")
            tx.send(CanFrame(177, 4, bytes(4), timestamp_ns=0))  # wheelspeed 0

        thread = threading.Thread(target=feed)
        thread.start()
        code = main(["monitor", "--channel", "inproc:cli-feed",
                     "--dbc", str(DATA / "sample.dbc"),
                     "--expect", "sampleFrame2.wheelspeed:100:200:1",
                     "--timeout", "0.8"])
        thread.join()
        assert code == 1

    def test_expectation_pass_exit_zero(self):
        from simbus.wire import InprocSender

        def feed():
            time.sleep(0.3)
            tx = InprocSender("cli-ok")
            tx.send(CanFrame(177, 4, bytes.fromhex("0000F401"), timestamp_ns=0))

        thread = threading.Thread(target=feed)
        thread.start()
        code = main(["monitor", "--channel", "inproc:cli-ok",
                     "--dbc", str(DATA / "sample.dbc"),
                     "--expect", "sampleFrame2.wheelspeed:0:13107:1",
                     "--timeout", "0.8"])
        thread.join()
        assert code == 0

    def test_unknown_expectation_signal_exit_two(self):
        code = main(["monitor", "--channel", "inproc:cli-bad",
                     "--dbc", str(DATA / "sample.dbc"),
                     "--expect", "sampleFrame1.gearbox:0:1:1",
                     "--timeout", "0.2"])
        assert code == 2

    def test_bad_channel_scheme_exit_two(self):
        code = main(["monitor", "--channel", "smoke-signals",
                     "--dbc", str(DATA / "sample.dbc"), "--timeout", "0.2"])
        assert code == 2
