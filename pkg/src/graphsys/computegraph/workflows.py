"""Small ready-made computing graphs used by demos, tests and the CLI."""
from __future__ import annotations

from .engine import ComputingGraph, Received, Updated


def three_node_workflow(compute=(1.0, 1.0, 2.0)):
    """Three nodes passing x, y, z around.

    n1 and n2 react to receipts, n3 reruns whenever it updates z. ``compute``
    holds the task times; use "walltime" entries to time the callbacks instead.
    """
    g = ComputingGraph()
    n1 = g.add_node("n1")
    n1.add_attributes("x", "y", "z", start=0)
    n2 = g.add_node("n2")
    n2.add_attributes("x", "y", "z", start=0)
    n3 = g.add_node("n3")
    n3.add_attributes("x", "y", "z", start=1)

    def task_n1(ctx):
        ctx.set("y", ctx.get("x") + ctx.get("z"))

    def task_n2(ctx):
        ctx.set("x", ctx.get("y") + ctx.get("z"))

    def task_n3(ctx):
        ctx.set("z", ctx.get("z") + 1)

    g.add_node_task(n1, "task_n1", task_n1, Received("x", "z"), compute_time=compute[0])
    g.add_node_task(n2, "task_n2", task_n2, Received("y", "z"), compute_time=compute[1])
    g.add_node_task(n3, "task_n3", task_n3, Updated("z"), compute_time=compute[2])
    g.connect(n1["y"], [n2["y"], n3["y"]], delay=2, send_on=Updated("y"), name="e1")
    g.connect(n2["x"], [n1["x"], n3["x"]], delay=1, send_on=Updated("x"), name="e2")
    g.connect(n3["z"], [n1["z"], n2["z"]], delay=1, send_on=Updated("z"), name="e3")
    for n, t in ((n1, "task_n1"), (n2, "task_n2"), (n3, "task_n3")):
        g.schedule_trigger(n, t, 0.0)
    return g
