"""Sample data: seven activity records for a demo horticulture base.

The rows are submitted through the form engine like any real entry, with a
settable clock so created-time values are reproducible; the CSV exporter's
golden test depends on these exact values.
"""

from __future__ import annotations

from datetime import datetime

from .access import Actor
from .clock import SettableClock

DEMO_BASE_NAME = "ACME FARMS"
DEMO_TEMPLATE = "hort-activity"

# (created time, answers by field name, options to add on the fly)
DEMO_ROWS = [
    (
        datetime(2022, 12, 20, 11, 35),
        {
            "Who": "Purdue Pete",
            "Where": "Bed 72",
            "What": "Tillage",
            "Duration": "40",
            "Notes": "left disc needs adjustment",
            "Power Unit": "Tractor 2 JD X120",
            "Implement(s)": ["bed shaper"],
        },
        [
            ("Who", "Purdue Pete"),
            ("Where", "Bed 72"),
            ("Power Unit", "Tractor 2 JD X120"),
            ("Implement(s)", "bed shaper"),
        ],
    ),
    (
        datetime(2022, 12, 20, 11, 37),
        {
            "Who": "Suzie Jones",
            "Where": "Bed 72",
            "What": "Plant/Transplant",
            "Power Unit": "Utility tractor",
            "Implement(s)": ["water wheel transplanter"],
            "Seeds planted": "onions - candy",
        },
        [
            ("Who", "Suzie Jones"),
            ("Power Unit", "Utility tractor"),
            ("Implement(s)", "water wheel transplanter"),
            ("Seeds planted", "onions - candy"),
        ],
    ),
    (
        datetime(2022, 12, 20, 11, 39),
        {
            "Who": "Purdue Pete",
            "Where": "Field 1",
            "What": "Spread/Spray",
            "Duration": "120",
            "Power Unit": "Gator",
            "Implement(s)": ["150 gal sprayer"],
            "Products applied": "Glyphosate",
        },
        [
            ("Where", "Field 1"),
            ("Power Unit", "Gator"),
            ("Implement(s)", "150 gal sprayer"),
            ("Products applied", "Glyphosate"),
        ],
    ),
    (
        datetime(2022, 12, 20, 11, 41),
        {
            "Who": "Suzie Jones",
            "Where": "Field 1",
            "What": "Plant/Transplant",
            "Notes": "burn down looked effective",
            "Power Unit": "Tractor 2 JD X120",
            "Implement(s)": ["seed planter"],
            "Seeds planted": "corn - sweet - 82 day",
            "Seeding Rate (seeds/ac)": "30000",
            "Fertilizers applied": "9-18-9 starter",
            "Fertilizer Rate (lb/ac)": "50",
        },
        [
            ("Implement(s)", "seed planter"),
            ("Seeds planted", "corn - sweet - 82 day"),
            ("Fertilizers applied", "9-18-9 starter"),
        ],
    ),
    (
        datetime(2022, 12, 20, 11, 42),
        {
            "Who": "Purdue Pete",
            "Where": "Field 1",
            "What": "Scout",
            "Notes": "popcorn is near ready",
        },
        [],
    ),
    (
        datetime(2022, 12, 20, 11, 50),
        {
            "Who": "Suzie Jones",
            "Where": "Bed 72",
            "What": "Harvest",
            "Duration": "30",
            "Notes": "bundles of rhubarb",
            "Power Unit": "human powered",
        },
        [("Power Unit", "human powered")],
    ),
    (
        datetime(2022, 12, 20, 12, 30),
        {
            "Who": "Purdue Pete",
            "Where": "Zone D",
            "What": "Scout",
            "Notes": "all looks great",
        },
        [("Where", "Zone D")],
    ),
]


def demo_clock() -> SettableClock:
    return SettableClock(DEMO_ROWS[0][0])


def load_demo(engine, actor: Actor, base_id: str | None = None) -> dict:
    """Submit the seven demo rows; the engine must be running on a settable
    clock for created-time values to match the shipped fixture."""
    if base_id is None:
        base_doc = engine.create_base(actor, DEMO_BASE_NAME, template=DEMO_TEMPLATE)
    else:
        base_doc = engine.describe_base(actor, base_id)
    form_id = base_doc["forms"][0]["id"]
    clock = engine.clock
    for at, answers, new_options in DEMO_ROWS:
        if isinstance(clock, SettableClock):
            clock.set(at)
        engine.submit_form(actor, form_id, answers, new_options)
    return base_doc
