"""
Long acceptance runs in sequence: unit suites, identity convergence,
planar spectra against their oracles, eigenvalue comparisons, spheromak
residuals and (with BELTRAMI_LAB_SLOW set) the cube cavity traces, the
duality witness and the probe contrast.

    python3 run_acceptance.py
"""

import os
import shlex
import subprocess
import sys
import time

from utils import is_truthy

ROOT = os.path.dirname(os.path.abspath(__file__))
EXIT_MEANINGS = {1: "check failed", 2: "usage or input error"}


def run_command(command, description):
    """Run one step from the repo root, echo its output and collect FAIL lines."""
    print(f"\n--- Starting: {description} ---")
    start_time = time.time()
    failures = []
    if isinstance(command, str):
        command = shlex.split(command)
    try:
        process = subprocess.Popen(command, cwd=ROOT, shell=False, stdout=subprocess.PIPE,
                                   stderr=subprocess.STDOUT, text=True)
        for line in process.stdout:
            print(line, end='')
            if line.rstrip().endswith(" FAIL"):
                failures.append(line.strip())
        process.wait()
    except OSError as e:
        print(f"!!! Could not start {description}: {e} !!!")
        return False

    elapsed = time.time() - start_time
    if process.returncode != 0:
        meaning = EXIT_MEANINGS.get(process.returncode, "unexpected exit")
        print(f"!!! {description}: {meaning} (Exit Code: {process.returncode}) !!!")
        for line in failures:
            print(f"    {line}")
        return False
    print(f"--- Finished: {description} (Took {elapsed:.2f}s) ---\n")
    return True


def main():
    py = shlex.quote(sys.executable)
    results = {}

    # 1. Unit suites (the slow ones too when BELTRAMI_LAB_SLOW is set)
    results["unit tests"] = run_command(f"{py} -m unittest discover tests", "Unit Tests")

    # 2. Identity convergence on the shell, both weights
    for alpha in (1, 2):
        results[f"weighted alpha={alpha}"] = run_command(
            f"{py} cli.py converge --suite identity --check weighted --alpha {alpha} "
            f"--domain shell --levels 3 --base 2",
            f"Weighted Identity Convergence (alpha={alpha})")

    # 3. Planar spectra against the Bessel and separation-of-variables oracles
    for domain, problem in (("disk", "dirichlet"), ("disk", "neumann"),
                            ("square", "dirichlet"), ("square", "neumann")):
        results[f"{domain} {problem}"] = run_command(
            f"{py} cli.py eig --problem {problem} --domain {domain} --n 64 --k 3",
            f"Planar Spectrum ({domain}, {problem})")

    # 4. First eigenvalues at n and 2n against their refinement error estimates
    for domain, n in (("square", 8), ("disk", 8), ("cube", 4), ("ball", 2)):
        results[f"compare {domain}"] = run_command(
            f"{py} cli.py compare --domain {domain} --n {n}", f"Spectrum Comparison ({domain})")

    # 5. Spheromak on the n = 8 ball
    results["spheromak"] = run_command(
        f"{py} cli.py probe --mode spheromak --domain ball --n 8", "Spheromak Residuals")

    # 6. 3D eigenvalues with trace and duality checks, the duality gap under refinement
    # and the boundary-condition contrast of the defect minimum
    if is_truthy(os.environ.get("BELTRAMI_LAB_SLOW")):
        results["maxwell cube"] = run_command(
            f"{py} cli.py eig --problem maxwell --domain cube --n 8 --k 4 --traces --duality",
            "Cube Maxwell Traces and Duality")
        results["duality"] = run_command(
            f"{py} cli.py converge --suite duality --domain cube --levels 3 --base 2",
            "Duality Witness Convergence")
        results["contrast"] = run_command(
            f"{py} cli.py probe --mode contrast --n 2 --iters 500 --restarts 3",
            "Defect Minimum Contrast")
    else:
        print("Skipping slow suites: BELTRAMI_LAB_SLOW not set in environment.")

    failed = [name for name, ok in results.items() if not ok]
    print(f"\nCompleted {len(results)} steps, {len(failed)} failed.")
    for name in failed:
        print(f"  FAILED: {name}")
    return 1 if failed else 0


if __name__ == "__main__":
    sys.exit(main())
