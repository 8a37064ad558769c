"""Smart-load device models.

Each device is a small machine whose state ``x`` evolves under the chosen
action, independently of the price ``c``. The full MDP state is the pair
``(x, c)``, flattened machine-major as ``x * n_levels + c``, and every
transition probability factorises as ``T(c'|c) * D_a(x, x')``.

Every reward has the form ``comfort_a(x, x') - price * energy(x, a)``
where ``price`` is the departing level ``c`` (default) or, optionally, the
arriving level ``c'``.

Four device kinds are supported:

``optional``
    Idle/Active load that runs at full or shed capacity (dimmable light).
``deferrable``
    Idle/Waiting load whose job can be postponed (dishwasher).
``control``
    Thermostat with ``num_temperature_levels`` deterministic levels.
``storage``
    Unplugged/Partial/Full battery that can keep, charge or discharge.
"""

from dataclasses import dataclass, field
from types import MappingProxyType

import numpy as np

from ._validation import check_positive_int, check_probability
from .exceptions import ValidationError
from .mdp import MdpModel

__all__ = [
    "DEVICE_KINDS",
    "DeviceSpec",
    "FactoredKernel",
    "default_spec",
    "compose",
    "composed_rewards",
    "factor_device",
    "build_model",
    "build_device",
    "build_optional_load",
    "build_deferrable_load",
    "build_control_load",
    "build_storage_load",
    "baseline_policy",
]

DEVICE_KINDS = ("optional", "deferrable", "control", "storage")

ACTION_NAMES = {
    "optional": ("pass", "full", "shed"),
    "deferrable": ("pass", "wait", "work"),
    "control": ("cool", "keep", "heat"),
    "storage": ("pass", "keep", "charge", "discharge"),
}

# Per kind: (required energy keys, required comfort keys, uses rho_on, uses rho_off)
_SCHEMA = {
    "optional": (("full", "shed"), ("full", "shed"), True, True),
    "deferrable": (("work",), ("delay",), True, False),
    "control": (("cool", "keep", "heat"), (), False, False),
    "storage": (("keep_partial", "keep_full", "charge", "discharge"), ("unplug",), True, True),
}

# The price-ignoring policy each device is compared against.
BASELINE_ACTION = {"optional": "full", "deferrable": "work", "control": "keep", "storage": "keep"}

REWARD_PRICES = ("current", "successor")


@dataclass(frozen=True)
class DeviceSpec:
    """Parameters of one device.

    Parameters
    ----------
    kind : {"optional", "deferrable", "control", "storage"}
    rho_on : float, optional
        Per-interval probability of the exogenous switch-on, job request
        or plug-in event. Used by optional, deferrable and storage loads.
    rho_off : float, optional
        Per-interval probability of switch-off or unplugging. Used by
        optional and storage loads.
    energies : mapping of str to float
        optional: ``full > shed > 0``; deferrable: ``work > 0``;
        control: ``heat > keep > cool >= 0``; storage:
        ``keep_full > keep_partial > 0``, ``charge > 0``, ``discharge < 0``.
    comforts : mapping of str to float
        optional: ``full > shed``; deferrable: ``delay < 0``;
        storage: ``unplug < 0``; control: none.
    num_temperature_levels : int, optional
        Control loads only, at least 2.
    reward_price : {"current", "successor"}, default="current"
        Which price level multiplies the energy term of the reward.
    """

    kind: str
    rho_on: float = None
    rho_off: float = None
    energies: dict = field(default_factory=dict)
    comforts: dict = field(default_factory=dict)
    num_temperature_levels: int = None
    reward_price: str = "current"

    def __post_init__(self):
        if self.kind not in DEVICE_KINDS:
            raise ValidationError(f"kind must be one of {DEVICE_KINDS}, got {self.kind!r}")
        energy_keys, comfort_keys, uses_on, uses_off = _SCHEMA[self.kind]
        energies = _check_keys(self.energies, energy_keys, "energies", self.kind)
        comforts = _check_keys(self.comforts, comfort_keys, "comforts", self.kind)
        for name, used in (("rho_on", uses_on), ("rho_off", uses_off)):
            value = getattr(self, name)
            if used:
                if value is None:
                    raise ValidationError(f"{self.kind} device requires {name}")
                object.__setattr__(self, name, check_probability(value, name))
            elif value is not None:
                raise ValidationError(f"{self.kind} device does not use {name}")
        if self.kind == "control":
            object.__setattr__(
                self,
                "num_temperature_levels",
                check_positive_int(self.num_temperature_levels, "num_temperature_levels", minimum=2),
            )
        elif self.num_temperature_levels is not None:
            raise ValidationError("num_temperature_levels applies to control devices only")
        if self.reward_price not in REWARD_PRICES:
            raise ValidationError(f"reward_price must be one of {REWARD_PRICES}")
        _check_orderings(self.kind, energies, comforts)
        object.__setattr__(self, "energies", MappingProxyType(energies))
        object.__setattr__(self, "comforts", MappingProxyType(comforts))

    @property
    def action_names(self):
        return ACTION_NAMES[self.kind]

    def to_dict(self):
        out = {"kind": self.kind}
        if self.rho_on is not None:
            out["rho_on"] = self.rho_on
        if self.rho_off is not None:
            out["rho_off"] = self.rho_off
        if self.num_temperature_levels is not None:
            out["num_temperature_levels"] = self.num_temperature_levels
        out["energies"] = dict(self.energies)
        out["comforts"] = dict(self.comforts)
        out["reward_price"] = self.reward_price
        return out


def _check_keys(values, required, label, kind):
    values = dict(values or {})
    missing = [k for k in required if k not in values]
    extra = [k for k in values if k not in required]
    if missing or extra:
        raise ValidationError(
            f"{kind} device {label} must have exactly keys {list(required)}"
            + (f"; missing {missing}" if missing else "")
            + (f"; unknown {extra}" if extra else "")
        )
    out = {}
    for k in required:
        v = values[k]
        if isinstance(v, bool) or not isinstance(v, (int, float)) or not np.isfinite(v):
            raise ValidationError(f"{label}.{k} must be a finite number, got {v!r}")
        out[k] = float(v)
    return out


def _require(condition, message):
    if not condition:
        raise ValidationError(message)


def _check_orderings(kind, e, c):
    if kind == "optional":
        _require(e["full"] > e["shed"] > 0, "optional load needs energies full > shed > 0")
        _require(c["full"] > c["shed"], "optional load needs comforts full > shed")
    elif kind == "deferrable":
        _require(e["work"] > 0, "deferrable load needs energies.work > 0")
        _require(c["delay"] < 0, "deferrable load needs comforts.delay < 0")
    elif kind == "control":
        _require(
            e["heat"] > e["keep"] > e["cool"] >= 0,
            "control load needs energies heat > keep > cool >= 0",
        )
    else:
        _require(
            e["keep_full"] > e["keep_partial"] > 0,
            "storage needs energies keep_full > keep_partial > 0",
        )
        _require(e["charge"] > 0, "storage needs energies.charge > 0")
        _require(e["discharge"] < 0, "storage needs energies.discharge < 0")
        _require(c["unplug"] < 0, "storage needs comforts.unplug < 0")


def default_spec(kind):
    """Reference parameters for each device kind.

    The control load uses the thermostat experiment values (10 levels,
    energies 0.1 / 1.0 / 2.1). The other kinds use illustrative defaults.
    """
    if kind == "optional":
        return DeviceSpec("optional", rho_on=0.3, rho_off=0.2,
                          energies={"full": 1.0, "shed": 0.3},
                          comforts={"full": 1.0, "shed": 0.5})
    if kind == "deferrable":
        return DeviceSpec("deferrable", rho_on=0.3, energies={"work": 1.0},
                          comforts={"delay": -0.1})
    if kind == "control":
        return DeviceSpec("control", num_temperature_levels=10,
                          energies={"cool": 0.1, "keep": 1.0, "heat": 2.1})
    if kind == "storage":
        return DeviceSpec("storage", rho_on=0.3, rho_off=0.2,
                          energies={"keep_partial": 0.05, "keep_full": 0.1,
                                    "charge": 1.0, "discharge": -0.9},
                          comforts={"unplug": -0.5})
    raise ValidationError(f"kind must be one of {DEVICE_KINDS}, got {kind!r}")


@dataclass(frozen=True, eq=False)
class FactoredKernel:
    """Machine-side dynamics and rewards of a device, before composing with prices.

    Attributes
    ----------
    machine : ndarray of shape (n_actions, n_machine, n_machine)
        ``machine[a, x, x']`` is ``D_a(x, x')``.
    available : ndarray of bool, shape (n_machine, n_actions)
    comfort : ndarray of shape (n_actions, n_machine, n_machine)
        Price-independent part of the reward.
    energy : ndarray of shape (n_machine, n_actions)
        Energy drawn by action ``a`` in machine state ``x``.
    action_names, machine_names : tuple of str
    """

    machine: np.ndarray
    available: np.ndarray
    comfort: np.ndarray
    energy: np.ndarray
    action_names: tuple
    machine_names: tuple

    def __post_init__(self):
        n_actions, n_machine, _ = np.shape(self.machine)
        if np.shape(self.available) != (n_machine, n_actions):
            raise ValidationError("available has the wrong shape")
        if np.shape(self.comfort) != np.shape(self.machine):
            raise ValidationError("comfort has the wrong shape")
        if np.shape(self.energy) != (n_machine, n_actions):
            raise ValidationError("energy has the wrong shape")
        for a in range(n_actions):
            rows = np.asarray(self.machine[a])[np.asarray(self.available)[:, a]]
            if rows.size and np.max(np.abs(rows.sum(axis=1) - 1.0)) > 1e-12:
                raise ValidationError(f"machine rows of action {self.action_names[a]!r} must sum to 1")

    @property
    def n_machine(self):
        return self.machine.shape[1]


def compose(factored, chain):
    """Full transition kernels ``P_a((x, c), (x', c')) = T(c'|c) D_a(x, x')``.

    Returns
    -------
    ndarray of shape (n_actions, n_machine * n_levels, n_machine * n_levels)
        States are indexed ``x * n_levels + c``.
    """
    transition = np.asarray(chain.transition)
    machine = np.asarray(factored.machine)
    if machine.ndim != 3 or machine.shape[1] != machine.shape[2]:
        raise ValidationError(f"machine kernel must have shape (A, X, X), got {machine.shape}")
    if transition.ndim != 2 or transition.shape[0] != transition.shape[1]:
        raise ValidationError("price transition must be square")
    return np.stack([np.kron(d, transition) for d in machine])


def composed_rewards(factored, price_now, price_next=None):
    """Full reward tensor ``R_a((x, c), (x', c'))``.

    Parameters
    ----------
    price_now : ndarray of shape (n_levels,)
        Price at the departing level.
    price_next : ndarray of shape (n_levels,), optional
        If given, the energy term uses the arriving level instead.
    """
    price_now = np.asarray(price_now, dtype=float)
    n = price_now.size
    if price_next is None:
        price = np.repeat(price_now[:, None], n, axis=1)
    else:
        price = np.repeat(np.asarray(price_next, dtype=float)[None, :], n, axis=0)
    ones = np.ones((n, n))
    n_machine = factored.n_machine
    rewards = []
    for a in range(factored.machine.shape[0]):
        energy = np.repeat(factored.energy[:, a][:, None], n_machine, axis=1)
        rewards.append(np.kron(factored.comfort[a], ones) - np.kron(energy, price))
    return np.stack(rewards)


def factor_device(spec):
    """Machine-side description of ``spec``; see :class:`FactoredKernel`."""
    if spec.kind == "optional":
        return _factor_optional(spec)
    if spec.kind == "deferrable":
        return _factor_deferrable(spec)
    if spec.kind == "control":
        return _factor_control(spec)
    return _factor_storage(spec)


def _random_switch(n_machine, p_to, to_state, otherwise):
    """Row of ``p * delta(to_state) + (1 - p) * delta(otherwise)``."""
    row = np.zeros(n_machine)
    row[to_state] += p_to
    row[otherwise] += 1.0 - p_to
    return row


def _factor_optional(spec):
    idle, active = 0, 1
    pass_, full, shed = 0, 1, 2
    e, c = spec.energies, spec.comforts
    machine = np.zeros((3, 2, 2))
    comfort = np.zeros((3, 2, 2))
    energy = np.zeros((2, 3))
    available = np.zeros((2, 3), dtype=bool)
    available[idle, pass_] = True
    available[active, [full, shed]] = True
    machine[pass_, idle] = _random_switch(2, spec.rho_on, active, idle)
    for a, key in ((full, "full"), (shed, "shed")):
        machine[a, active] = _random_switch(2, spec.rho_off, idle, active)
        comfort[a, active, :] = c[key]
        energy[active, a] = e[key]
    return FactoredKernel(machine, available, comfort, energy,
                          ACTION_NAMES["optional"], ("idle", "active"))


def _factor_deferrable(spec):
    idle, waiting = 0, 1
    pass_, wait, work = 0, 1, 2
    machine = np.zeros((3, 2, 2))
    comfort = np.zeros((3, 2, 2))
    energy = np.zeros((2, 3))
    available = np.zeros((2, 3), dtype=bool)
    available[idle, pass_] = True
    available[waiting, [wait, work]] = True
    machine[pass_, idle] = _random_switch(2, spec.rho_on, waiting, idle)
    machine[wait, waiting, waiting] = 1.0
    machine[work, waiting, idle] = 1.0
    comfort[wait, waiting, :] = spec.comforts["delay"]
    energy[waiting, work] = spec.energies["work"]
    return FactoredKernel(machine, available, comfort, energy,
                          ACTION_NAMES["deferrable"], ("idle", "waiting"))


def _factor_control(spec):
    n = spec.num_temperature_levels
    cool, keep, heat = 0, 1, 2
    machine = np.zeros((3, n, n))
    available = np.ones((n, 3), dtype=bool)
    available[0, cool] = False
    available[n - 1, heat] = False
    for x in range(n):
        machine[keep, x, x] = 1.0
        if x > 0:
            machine[cool, x, x - 1] = 1.0
        if x < n - 1:
            machine[heat, x, x + 1] = 1.0
    e = spec.energies
    energy = np.tile([e["cool"], e["keep"], e["heat"]], (n, 1))
    energy[~available] = 0.0
    return FactoredKernel(machine, available, np.zeros((3, n, n)), energy,
                          ACTION_NAMES["control"], tuple(f"t{x}" for x in range(n)))


def _factor_storage(spec):
    unplugged, partial, full = 0, 1, 2
    pass_, keep, charge, discharge = 0, 1, 2, 3
    e, unplug = spec.energies, spec.comforts["unplug"]
    rho_off = spec.rho_off
    machine = np.zeros((4, 3, 3))
    comfort = np.zeros((4, 3, 3))
    energy = np.zeros((3, 4))
    available = np.zeros((3, 4), dtype=bool)
    available[unplugged, pass_] = True
    available[partial, [keep, charge]] = True
    available[full, [keep, discharge]] = True

    machine[pass_, unplugged] = _random_switch(3, spec.rho_on, partial, unplugged)
    for x in (partial, full):
        machine[keep, x] = _random_switch(3, rho_off, unplugged, x)
    machine[charge, partial] = _random_switch(3, rho_off, unplugged, full)
    machine[discharge, full] = _random_switch(3, rho_off, unplugged, partial)

    # Unplug discomfort on keep applies only when departing from partial.
    comfort[keep, partial, unplugged] = unplug
    comfort[discharge, full, unplugged] = unplug
    energy[partial, keep] = e["keep_partial"]
    energy[full, keep] = e["keep_full"]
    energy[partial, charge] = e["charge"]
    energy[full, discharge] = e["discharge"]
    return FactoredKernel(machine, available, comfort, energy,
                          ACTION_NAMES["storage"], ("unplugged", "partial", "full"))


def build_model(factored, chain, reward_price="current"):
    """Compose a :class:`FactoredKernel` with a price chain into an MdpModel."""
    if reward_price not in REWARD_PRICES:
        raise ValidationError(f"reward_price must be one of {REWARD_PRICES}")
    n_levels = chain.n_levels
    kernel = compose(factored, chain)
    price_next = chain.levels if reward_price == "successor" else None
    reward = composed_rewards(factored, chain.levels, price_next)
    available = np.repeat(np.asarray(factored.available), n_levels, axis=0)
    energy = np.repeat(np.asarray(factored.energy), n_levels, axis=0)
    labels = np.array([(x, c) for x in range(factored.n_machine) for c in range(n_levels)])
    return MdpModel(kernel, reward, available, energy=energy,
                    action_names=factored.action_names, state_labels=labels)


def build_device(spec, chain):
    """Build the MDP for any device kind."""
    return build_model(factor_device(spec), chain, spec.reward_price)


def _builder(kind):
    def build(spec, chain):
        if spec.kind != kind:
            raise ValidationError(f"expected a {kind} device spec, got kind={spec.kind!r}")
        return build_device(spec, chain)

    build.__name__ = f"build_{kind}_load"
    return build


build_optional_load = _builder("optional")
build_optional_load.__doc__ = """Idle/Active load: ``pass`` in Idle, ``full`` or ``shed`` in Active."""
build_deferrable_load = _builder("deferrable")
build_deferrable_load.__doc__ = """Idle/Waiting load: ``pass`` in Idle, ``wait`` or ``work`` in Waiting."""
build_control_load = _builder("control")
build_control_load.__doc__ = """Thermostat: ``cool``/``keep``/``heat`` move the level by -1/0/+1.

``cool`` is unavailable at the lowest level and ``heat`` at the highest.
"""
build_storage_load = _builder("storage")
build_storage_load.__doc__ = """Battery: ``pass`` when unplugged, ``keep``/``charge`` when partial,
``keep``/``discharge`` when full. Any action but ``pass`` may end unplugged."""


def baseline_policy(model, action):
    """Price-ignoring policy that plays ``action`` wherever it is available.

    States where ``action`` is unavailable fall back to their lowest-index
    available action.
    """
    a = model.action_index(action)
    policy = np.argmax(model.available, axis=1).astype(np.intp)
    policy[model.available[:, a]] = a
    return policy
