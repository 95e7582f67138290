"""Regenerate the bundled sample CSVs from the seeded synthetic generators.

Run from the repository root::

    python3 sample_data/generate.py

The files are committed, so running this is only needed after changing a
generator.  Seeds are fixed: simple uses 3031, the weekly and fleet
analogs use 0.
"""

import os

from sigdecomp.csvio import write_matrix_csv
from sigdecomp import synth

HERE = os.path.dirname(os.path.abspath(__file__))


def main():
    simple = synth.simple(3031)
    write_matrix_csv(
        os.path.join(HERE, "simple.csv"),
        simple.signal.values,
        ("y",),
        time=tuple(str(i) for i in range(simple.signal.T)),
        time_name="t",
    )

    co2 = synth.co2_weekly(0)
    write_matrix_csv(
        os.path.join(HERE, "co2_weekly.csv"),
        co2.signal.values,
        ("concentration",),
        time=tuple(str(i) for i in range(co2.signal.T)),
        time_name="week",
    )

    pv = synth.pv_fleet(0)
    write_matrix_csv(
        os.path.join(HERE, "pv_fleet.csv"),
        pv.signal.values,
        tuple(f"string{i}" for i in range(pv.signal.p)),
        time=tuple(str(i) for i in range(pv.signal.T)),
        time_name="t",
    )
    print("wrote simple.csv, co2_weekly.csv, pv_fleet.csv")


if __name__ == "__main__":
    main()
