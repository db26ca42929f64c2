"""Rebuild SiouxFalls_net.tntp / SiouxFalls_trips.tntp from the copy bundled with aequilibrae.

The public TransportationNetworks repository is not reachable from every build
environment; aequilibrae ships the same instance (76 BPR links, 360,600 trips)
as a project database plus an OMX demand matrix. Usage::

    pip download --no-deps aequilibrae -d /tmp/aeq
    python tools/extract_sioux_falls.py /tmp/aeq/aequilibrae-*.whl src/socompliance/data
"""
import io
import sqlite3
import sys
import tempfile
import zipfile
from pathlib import Path

import h5py
import numpy as np


def main(wheel, out_dir):
    out = Path(out_dir)
    with zipfile.ZipFile(wheel) as whl:
        bundle = zipfile.ZipFile(io.BytesIO(whl.read("aequilibrae/reference_files/sioux_falls.zip")))
    with tempfile.TemporaryDirectory() as tmp:
        bundle.extractall(tmp)
        con = sqlite3.connect(Path(tmp) / "project_database.sqlite")
        links = con.execute(
            "select a_node, b_node, capacity_ab, free_flow_time, alpha, beta from links order by link_id"
        ).fetchall()
        con.close()
        with h5py.File(Path(tmp) / "matrices" / "demand.omx", "r") as omx:
            demand = np.asarray(omx["data"]["matrix"][:], dtype=float)
            zones = [int(z) for z in omx["lookup"]["taz"][:]]

    lines = [
        "<NUMBER OF ZONES> 24",
        "<NUMBER OF NODES> 24",
        "<FIRST THRU NODE> 1",
        f"<NUMBER OF LINKS> {len(links)}",
        "<ORIGINAL HEADER>~ \tInit node \tTerm node \tCapacity \tLength \tFree Flow Time \tB\tPower\tSpeed limit \tToll \tType\t;",
        "<END OF METADATA>",
        "",
        "",
        "~ \tinit_node\tterm_node\tcapacity\tlength\tfree_flow_time\tb\tpower\tspeed\ttoll\tlink_type\t;",
    ]
    for a, b, cap, fft, alpha, beta in links:
        lines.append(f"\t{a}\t{b}\t{cap:.12g}\t{fft:g}\t{fft:g}\t{alpha:g}\t{beta:g}\t0\t0\t1\t;")
    (out / "SiouxFalls_net.tntp").write_text("\n".join(lines) + "\n")

    rows = [f"<NUMBER OF ZONES> {len(zones)}", f"<TOTAL OD FLOW> {demand.sum():.1f}", "<END OF METADATA>", "", ""]
    for i, o in enumerate(zones):
        rows.append(f"Origin \t{o}")
        cells = [f"{d:5d} : {demand[i, j]:8.1f};" for j, d in enumerate(zones)]
        for k in range(0, len(cells), 5):
            rows.append("  ".join(cells[k:k + 5]))
        rows.append("")
    (out / "SiouxFalls_trips.tntp").write_text("\n".join(rows) + "\n")


if __name__ == "__main__":
    main(sys.argv[1], sys.argv[2])
