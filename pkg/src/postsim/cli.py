"""Command-line harness: ``postsim <run|majority|fig1|pp-decide|fantasy|selftest>``.

Exit codes: 0 success, 1 input error, 2 zero-probability postselection,
3 resource cap exceeded.
"""
from __future__ import annotations

import csv
import io
import json
import sys
from contextlib import contextmanager

import click

from . import fantasy, majority, pathsum, rewrite
from .dense import run_circuit
from .errors import PathBudgetExceeded, PostsimError, ZeroMass, ZeroProbability
from .state import FantasyRule
from .textio import load_circuit, load_truth_table

EXIT_OK, EXIT_INPUT, EXIT_ZERO, EXIT_BUDGET = 0, 1, 2, 3
FORMATS = click.Choice(["text", "csv", "json-lines"])


def _bits(z: int, n: int) -> str:
    return format(z, f"0{n}b")


@contextmanager
def _sink(output):
    if output in (None, "-"):
        yield sys.stdout
    else:
        with open(output, "w", encoding="utf-8", newline="") as fh:
            yield fh


def _emit(output, text: str) -> None:
    with _sink(output) as fh:
        fh.write(text)


def _table(header, rows, fmt: str) -> str:
    if fmt == "json-lines":
        return "".join(json.dumps(dict(zip(header, r))) + "\n" for r in rows)
    if fmt == "csv":
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(header)
        w.writerows(rows)
        return buf.getvalue()
    widths = [max(len(str(h)), *(len(str(r[j])) for r in rows)) if rows else len(str(h)) for j, h in enumerate(header)]
    lines = ["  ".join(str(h).rjust(w) for h, w in zip(header, widths))]
    lines += ["  ".join(str(v).rjust(w) for v, w in zip(r, widths)) for r in rows]
    return "\n".join(lines) + "\n"


def _report(report: majority.DecisionReport, fmt: str) -> str:
    if fmt == "csv":
        return report.to_csv()
    if fmt == "json-lines":
        return report.to_json_line()
    return report.to_text()


def _instance(path, pad: bool):
    inst = load_truth_table(path)
    return majority.pad_instance(inst) if pad else inst


@click.group()
def cli():
    """Postselected quantum circuit simulation."""


@cli.command()
@click.argument("circuit_path", type=click.Path(exists=True, dir_okay=False))
@click.option("--backend", type=click.Choice(["dense", "pathsum"]), default="dense", show_default=True)
@click.option("--input", "input_index", type=int, default=0, show_default=True, help="Input basis index.")
@click.option("--format", "fmt", type=FORMATS, default="text", show_default=True)
@click.option("--output", "-o", default=None, help="Write to this file instead of stdout.")
def run(circuit_path, backend, input_index, fmt, output):
    """Run a circuit and print final amplitudes (dense) or ledger integers (pathsum)."""
    c = load_circuit(circuit_path)
    n = c.num_qubits
    if backend == "dense":
        state = run_circuit(c, input_index)
        rows = [
            (z, _bits(z, n), f"{a.real:.10g}", f"{a.imag:.10g}", f"{abs(a) ** 2:.10g}")
            for z, a in enumerate(state.amps)
            if abs(a) > 1e-15
        ]
        _emit(output, _table(["index", "bits", "re", "im", "prob"], rows, fmt))
    else:
        ledger = pathsum.enumerate_ledger(c, input_index)
        rows = [(z, _bits(z, n), v) for z, v in ledger.sums.items()]
        text = _table(["index", "bits", "coefficient"], rows, fmt)
        if fmt == "text":
            text = f"hadamards = {ledger.hadamard_count}\nscale = 2^(-{ledger.hadamard_count}/2)\n" + text
        _emit(output, text)
    return EXIT_OK


@cli.command("majority")
@click.argument("table_path", type=click.Path(exists=True, dir_okay=False))
@click.option("--mode", type=click.Choice(["analytic", "circuit", "sampled"]), default="analytic", show_default=True)
@click.option("--pad", is_flag=True, help="Pad the instance so that s > 0 first.")
@click.option("--reps", type=int, default=60, show_default=True, help="Repetitions per i (sampled mode).")
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--i", "i_override", type=int, default=None, help="Only evaluate this ratio exponent.")
@click.option("--format", "fmt", type=FORMATS, default="text", show_default=True)
@click.option("--output", "-o", default=None)
def majority_cmd(table_path, mode, pad, reps, seed, i_override, fmt, output):
    """Decide whether s < 2^(n-1) for a truth table."""
    inst = _instance(table_path, pad)
    if mode == "analytic":
        report = majority.decide_majority_analytic(inst)
    elif mode == "circuit":
        report = majority.decide_majority_circuit(inst)
    else:
        report = majority.decide_majority_sampled(inst, reps, seed)
    if i_override is not None:
        if i_override not in report.overlaps:
            raise click.BadParameter(f"i must lie in [-{inst.n}, {inst.n}]", param_hint="--i")
        report.overlaps = {i_override: report.overlaps[i_override]}
        if report.plus_fractions is not None:
            report.plus_fractions = {i_override: report.plus_fractions[i_override]}
            report.verdict = report.plus_fractions[i_override] >= report.threshold
        else:
            report.verdict = report.overlaps[i_override] >= report.threshold
    _emit(output, _report(report, fmt))
    return EXIT_OK


@cli.command()
@click.argument("table_path", type=click.Path(exists=True, dir_okay=False))
@click.option("--pad", is_flag=True)
@click.option("--output", "-o", default=None)
def fig1(table_path, pad, output):
    """CSV of (i, ratio, amp0, amp1, overlap) along the ratio sweep."""
    inst = _instance(table_path, pad)
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["i", "ratio", "amp0", "amp1", "overlap"])
    for i, r, a0, a1, ov in majority.fig1_rows(inst):
        w.writerow([i, f"{r:.6g}", f"{a0:.6g}", f"{a1:.6g}", f"{ov:.6g}"])
    _emit(output, buf.getvalue())
    return EXIT_OK


@cli.command("pp-decide")
@click.argument("circuit_path", type=click.Path(exists=True, dir_okay=False))
@click.option("--input", "input_index", type=int, default=0, show_default=True)
@click.option("--p", "p", type=int, default=2, show_default=True,
              help="Even exponent; 2 compares conditional acceptance, >= 4 compares p-mass of accept=1.")
@click.option("--normalize", is_flag=True, help="Defer intermediate postselections first.")
@click.option("--format", "fmt", type=FORMATS, default="text", show_default=True)
@click.option("--output", "-o", default=None)
def pp_decide_cmd(circuit_path, input_index, p, normalize, fmt, output):
    """Exact integer ledger decision for H/X/CNOT/Toffoli circuits."""
    c = load_circuit(circuit_path)
    if normalize:
        c = rewrite.normalize_postselections(c)
    if p == 2:
        cmp = pathsum.pp_compare(c, input_index)
    else:
        n, a = c.num_qubits, c.accept_qubit
        cmp = pathsum.p_power_compare(c, p, lambda z: (z >> (n - 1 - a)) & 1, input_index)
    fields = {"p": p, "accept_sum": cmp.accept, "reject_sum": cmp.reject,
              "tie": cmp.tie, "verdict": cmp.verdict}
    if fmt == "json-lines":
        text = json.dumps(fields) + "\n"
    elif fmt == "csv":
        text = _table(list(fields), [[str(v).lower() if isinstance(v, bool) else v for v in fields.values()]], "csv")
    else:
        text = "".join(f"{k} = {str(v).lower() if isinstance(v, bool) else v}\n" for k, v in fields.items())
    _emit(output, text)
    return EXIT_OK


@cli.command("fantasy")
@click.argument("table_path", type=click.Path(exists=True, dir_okay=False))
@click.option("--p", "p", type=float, default=1.0, show_default=True, help="Measurement exponent.")
@click.option("--gadget", type=click.Choice(["boost", "nonunitary"]), default="boost", show_default=True,
              help="boost: unitary gates under the p-rule; nonunitary: damping gates under p = 2.")
@click.option("--q-poly", type=int, default=fantasy.DEFAULT_Q_POLY, show_default=True)
@click.option("--reps", type=int, default=100, show_default=True)
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--pad", is_flag=True)
@click.option("--format", "fmt", type=FORMATS, default="text", show_default=True)
@click.option("--output", "-o", default=None)
def fantasy_cmd(table_path, p, gadget, q_poly, reps, seed, pad, fmt, output):
    """Majority decision without postselection, via nonunitary gates or a p-rule."""
    inst = _instance(table_path, pad)
    if gadget == "boost":
        report = fantasy.majority_via_bqp_p(inst, FantasyRule(p), reps, seed, q_poly)
    else:
        report = fantasy.majority_via_nonunitary(inst, reps, seed, q_poly)
    _emit(output, _report(report, fmt))
    return EXIT_OK


def run_selftest(max_n: int = 3) -> list[str]:
    """Exhaustive dichotomy and padding check; returns a list of failure messages."""
    failures = []
    for n in range(1, max_n + 1):
        for code in range(1 << (1 << n)):
            inst = majority.MajorityInstance.from_index(n, code)
            expected = inst.s < (1 << (n - 1))
            padded = majority.decide_majority_analytic(majority.pad_instance(inst))
            if padded.verdict != expected:
                failures.append(f"padding n={n} table={inst.bits()}")
            if inst.s == 0:
                continue
            rep = majority.decide_majority_analytic(inst)
            if rep.verdict != expected:
                failures.append(f"verdict n={n} table={inst.bits()}")
            if expected and rep.max_overlap < majority.WORST_WITNESS_OVERLAP - 1e-12:
                failures.append(f"witness bound n={n} table={inst.bits()}")
            if not expected and rep.max_overlap > majority.NON_WITNESS_BOUND + 1e-12:
                failures.append(f"non-witness bound n={n} table={inst.bits()}")
    return failures


@cli.command()
@click.option("--max-n", type=click.IntRange(1, 4), default=3, show_default=True)
def selftest(max_n):
    """Exhaustive dichotomy check over every truth table with n <= max-n."""
    failures = run_selftest(max_n)
    tables = sum(1 << (1 << n) for n in range(1, max_n + 1))
    for msg in failures:
        click.echo(f"FAIL {msg}", err=True)
    click.echo(f"selftest: {tables} tables, {len(failures)} failures")
    return EXIT_OK if not failures else EXIT_INPUT


def run_cli(argv=None) -> int:
    """Invoke the CLI and translate errors into exit codes."""
    try:
        rv = cli.main(args=argv, prog_name="postsim", standalone_mode=False)
    except click.exceptions.Exit as exc:
        return exc.exit_code
    except click.exceptions.Abort:
        click.echo("aborted", err=True)
        return EXIT_INPUT
    except click.ClickException as exc:
        exc.show()
        return EXIT_INPUT
    except (ZeroProbability, ZeroMass) as exc:
        click.echo(f"error: {type(exc).__name__}: {exc}", err=True)
        return EXIT_ZERO
    except PathBudgetExceeded as exc:
        click.echo(f"error: PathBudgetExceeded: {exc}", err=True)
        return EXIT_BUDGET
    except (PostsimError, OSError) as exc:
        click.echo(f"error: {type(exc).__name__}: {exc}", err=True)
        return EXIT_INPUT
    return rv if isinstance(rv, int) else EXIT_OK


def main() -> None:
    sys.exit(run_cli())

