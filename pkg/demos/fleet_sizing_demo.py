"""How many tight-headway CAVs restore a pre-departure average headway?

The loop average time headway is affine in the number of CAVs holding a
tighter headway, so the minimum count has a closed form.  Run:

    python3 demos/fleet_sizing_demo.py
"""

from ringflow import HeadwayScenario, required_cavs, verify_headway


def main():
    s = HeadwayScenario(
        prev_headway=2.5,
        cur_headway=2.6,
        total_vehicles=60,
        cav_headway=2.0,
    )
    raw, count = required_cavs(s)
    print(
        f"fleet of {s.total_vehicles}: average headway drifted "
        f"{s.prev_headway} s -> {s.cur_headway} s"
    )
    print(
        f"CAVs at {s.cav_headway} s needed to restore the average: "
        f"raw {raw:.6f} -> count {count}"
    )
    print(
        f"check: with {count} CAVs the blended average is "
        f"{verify_headway(s, count):.4f} s (target {s.prev_headway} s)"
    )

    s2 = HeadwayScenario(
        prev_headway=2.549,
        cur_headway=2.5779,
        total_vehicles=67,
        cav_headway=2.0,
    )
    raw2, count2 = required_cavs(s2)
    print(
        f"\nsecond scenario (67 vehicles, 2.549 -> 2.5779 s, CAV 2.0 s): "
        f"raw {raw2:.4f} -> count {count2}"
    )
    print(
        "note: one published worked example quotes 5 for these inputs; "
        "direct substitution into the headway-balance equation gives "
        f"{raw2:.2f}, which ceils to {count2}."
    )


if __name__ == "__main__":
    main()
