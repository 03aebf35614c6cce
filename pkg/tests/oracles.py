"""Independent oracles, written before and apart from the library code.

These deliberately re-derive results with different structure (explicit
feature-map walks, itertools enumeration, all-pairs domination) so they
stay meaningful as a second route.
"""

import itertools


def layer_walk_counts(block, kernels, fc1, fc2, output_classes=7, side=48):
    """Walk the feature maps layer by layer and tally weights/multiplies.

    kernels: one kernel count per block, length == block.
    """
    assert len(kernels) == block
    params = 0
    macs = 0
    channels = 1
    for k in kernels:
        # first conv of the block
        params += (3 * 3 * channels + 1) * k
        macs += side * side * (3 * 3 * channels) * k
        # second conv
        params += (3 * 3 * k + 1) * k
        macs += side * side * (3 * 3 * k) * k
        side //= 2  # pooling
        channels = k
    units = side * side * channels
    for width in (fc1, fc2, output_classes):
        params += units * width + width
        macs += units * width
        units = width
    return params, macs


def enumerate_config_tuples(space):
    """All valid configurations as plain tuples, by direct nested product
    over the grids (no canonical-index machinery)."""
    grids = {name: list(space.spec_for(name).grid) for name in space.params}
    tuples = []
    for block in grids["block"]:
        kernel_names = ["k1", "k2"]
        if block >= 3:
            kernel_names.append("k3")
        if block == 4:
            kernel_names.append("k4")
        axes = [grids[name] for name in kernel_names]
        axes += [grids["fc1"], grids["do1"], grids["fc2"], grids["do2"]]
        for combo in itertools.product(*axes):
            tuples.append((block,) + tuple(zip(kernel_names + ["fc1", "do1", "fc2", "do2"], combo)))
    return tuples


def conv_subspace_count(space):
    """Count (block, kernel...) tuples by listing them."""
    grids = {name: list(space.spec_for(name).grid) for name in space.params}
    count = 0
    for block in grids["block"]:
        kernel_names = ["k1", "k2"] + (["k3"] if block >= 3 else []) + (
            ["k4"] if block == 4 else []
        )
        count += len(list(itertools.product(*(grids[n] for n in kernel_names))))
    return count


def fc_subspace_count(space):
    grids = {name: list(space.spec_for(name).grid) for name in space.params}
    return len(grids["fc1"]) * len(grids["do1"]) * len(grids["fc2"]) * len(grids["do2"])


def pareto_oracle(points):
    """All-pairs domination over (accuracy, latency, power) triples;
    returns the indices of non-dominated points."""

    def dominates(a, b):
        ge = a[0] >= b[0] and a[1] <= b[1] and a[2] <= b[2]
        strict = a[0] > b[0] or a[1] < b[1] or a[2] < b[2]
        return ge and strict

    front = []
    for i, candidate in enumerate(points):
        if not any(dominates(other, candidate) for j, other in enumerate(points) if j != i):
            front.append(i)
    return front
