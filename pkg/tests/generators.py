"""Random valid workflows for round-trip and ordering properties."""
import random

from streamflow.plates import MetaDataTree, PlateDefinition
from streamflow.timeline import TimeInterval, TimeIntervalSet
from streamflow.tools import ToolInvocation, default_registry
from streamflow.workflow import Factor, Node, Workflow

REG = default_registry()
CHANNELS = ("memory", "file", "store")


def _tool(name, **params):
    return ToolInvocation(REG.resolve(name), params)


def random_tree(rng, keys, width=3, parent=(), tree=None, depth=0):
    tree = tree if tree is not None else MetaDataTree()
    for k in keys:
        tree.declare_tag(k)
    if depth == len(keys):
        return tree
    for i in range(rng.randint(0, width)):
        path = tree.add(keys[depth], rng.choice(["uk", "fr", "de", "1", "2", "x y", "ü"]) + str(i), parent)
        random_tree(rng, keys, width, path, tree, depth + 1)
    return tree


def random_workflow(rng: random.Random, max_nodes=8) -> Workflow:
    depth = rng.randint(0, 3)
    keys = [f"k{i}" for i in range(depth)]
    plates = []
    for i, k in enumerate(keys):
        values = None
        if rng.random() < 0.2:
            values = tuple(sorted(rng.sample(["uk0", "fr1", "de2", "10"], 2)))
        plates.append(PlateDefinition(f"p{i}", k, f"p{i - 1}" if i else None, values))
    # split plate: one extra dynamic plate under a random level
    split_parent = rng.randint(-1, depth - 1)
    split_plate = None
    if rng.random() < 0.5:
        split_plate = PlateDefinition("dyn", "dyn_key", f"p{split_parent}" if split_parent >= 0 else None)
        plates.append(split_plate)
    tree = random_tree(rng, keys)
    if split_plate is not None:
        tree.declare_tag("dyn_key")

    level = {None: -1, **{p.plate_id: i for i, p in enumerate(plates) if p is not split_plate}}
    nodes, factors = [], []
    for i in range(rng.randint(1, max_nodes)):
        plate = rng.choice([None] + [p.plate_id for p in plates if p is not split_plate])
        node = Node(f"n{i}", plate, rng.choice(CHANNELS))
        # sources on the same plate or an ancestor
        candidates = [n for n in nodes if n.plate is None or n.plate == "dyn"
                      and node.plate == "dyn" or n.plate in level and n.plate != "dyn"
                      and level[n.plate] <= level.get(plate, -1)]
        candidates = [n for n in candidates if n.plate != "dyn" or plate == "dyn"]
        r = rng.random()
        if not candidates or r < 0.3:
            tool = rng.choice([
                _tool("clock", stride=rng.choice(["1s", 250, "1m"])),
                _tool("sliding_window", width="10s", stride="5s"),
                _tool("csv_import", path="data/{k0}.csv" if depth else "data/x.csv", as_record=rng.random() < 0.5),
            ])
            factors.append(Factor("raw", tool, (), node.node_id))
        elif split_plate is not None and r < 0.45 and all(n.plate != "dyn" for n in nodes[-1:]) and \
                any(n.plate == split_plate.parent_plate for n in candidates):
            src = rng.choice([n for n in candidates if n.plate == split_plate.parent_plate])
            node = Node(node.node_id, "dyn", node.channel)
            factors.append(Factor("multi_output", _tool("splitter", key_field="uid", output_key="dyn_key"),
                                  (src.node_id,), node.node_id))
        else:
            src = rng.choice(candidates)
            tool = rng.choice([
                _tool("sum_list"),
                _tool("sliding_apply", width=rng.choice(["5s", "300s", 1000]), aggregate=rng.choice(["mean", "max"])),
                _tool("component", field="angle"),
            ])
            factors.append(Factor("basic", tool, (src.node_id,), node.node_id))
        nodes.append(node)
    intervals = []
    for _ in range(rng.randint(0, 3)):
        a = rng.randint(0, 10**12)
        intervals.append(TimeInterval(a, a + rng.randint(1, 10**9)))
    return Workflow(
        workflow_id=f"wf_{rng.randint(0, 999)}",
        name=rng.choice(["", "Sea ice", "sleep ☾"]),
        description=rng.choice(["", "generated"]),
        plates=tuple(plates),
        nodes=tuple(nodes),
        factors=tuple(factors),
        requested_intervals=TimeIntervalSet(intervals),
        mode=rng.choice(["offline_only", "online"]),
        meta_data=tree,
    )
