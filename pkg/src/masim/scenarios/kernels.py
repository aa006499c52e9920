"""Registered transition kernels, built from a kind name and a parameter dict.

Every factory returns ``kernel(state, bundle, rng) -> (state, output)``.
Kernels draw randomness only from the rng they are handed.
"""

from __future__ import annotations

from typing import Callable, Mapping

from ..core import AgentState, InputBundle, Value
from ..feedback import DiscreteDistribution, kernel_with_feedback

KernelFactory = Callable[[Mapping], Callable]

IDLE = Value("idle")


def _by_tag(bundle: InputBundle, tag: str):
    """Payloads of neighbor outputs carrying ``tag``, in source-id order."""
    return [v.payload for _, v in sorted(bundle.neighbor_outputs.items()) if v.type_tag == tag]


def _fb(bundle: InputBundle, tag: str):
    fb = bundle.feedback
    if fb is not None and fb.payload.type_tag == tag:
        return fb.payload
    return None


def echo(params: Mapping):
    """Repeat the first neighbor's output (lowest id); emit ``idle_tag`` with no neighbors."""
    idle = Value(params.get("idle_tag", "empty"))

    def kernel(state, bundle, rng):
        if bundle.neighbor_outputs:
            return state, bundle.neighbor_outputs[min(bundle.neighbor_outputs)]
        return state, idle

    return kernel


def counter(params: Mapping):
    step = int(params.get("step", 1))

    def kernel(state, bundle, rng):
        n = int(state.data or 0) + step
        return AgentState(n), Value("count", n)

    return kernel


def bernoulli_vote(params: Mapping):
    """Report the ground-truth label, flipped with probability ``error``.

    Truth comes from a ``label`` feedback payload, else a ``label`` neighbor
    output. Always consumes exactly one uniform.
    """
    e = float(params.get("error", 0.0))
    if not 0.0 <= e <= 1.0:
        raise ValueError("error must lie in [0, 1]")

    def kernel(state, bundle, rng):
        u = rng.random()
        fb = _fb(bundle, "label")
        labels = _by_tag(bundle, "label")
        truth = fb.payload if fb is not None else (labels[0] if labels else None)
        if truth is None:
            return state, Value("vote", None)
        truth = int(truth)
        return state, Value("vote", truth if u >= e else 1 - truth)

    return kernel


# --- flight booking -----------------------------------------------------------

def flight_ui(params: Mapping):
    def kernel(state, bundle, rng):
        req = _fb(bundle, "user_request")
        if req is None:
            return state, IDLE
        n = int((state.data or {}).get("requests", 0)) + 1
        return AgentState({"requests": n}), Value("query", req.payload)

    return kernel


def flight_search(params: Mapping):
    flights = [dict(f) for f in params.get("flights", ())]
    jitter = int(params.get("jitter", 0))

    def kernel(state, bundle, rng):
        queries = _by_tag(bundle, "query")
        if not queries:
            return state, IDLE
        q = queries[0]
        budget = q.get("budget", float("inf"))
        quotes = []
        for f in flights:  # one draw per flight, in declaration order
            price = int(f["price"]) + int(rng.integers(-jitter, jitter + 1))
            if price <= budget and f.get("dest") in (None, q.get("dest")):
                quotes.append({"flight": f["flight"], "price": price})
        quotes.sort(key=lambda o: (o["price"], o["flight"]))
        n = int((state.data or {}).get("searches", 0)) + 1
        return AgentState({"searches": n}), Value("flight_options", {"query": q, "options": quotes})

    return kernel


def flight_payment(params: Mapping):
    fail_prob = float(params.get("fail_prob", 0.0))

    def kernel(state, bundle, rng):
        data = dict(state.data or {"pending": None, "bookings": 0})
        for offer in _by_tag(bundle, "flight_options"):
            if offer["options"]:
                data["pending"] = offer["options"][0]
        pay = _fb(bundle, "payment_info")
        if pay is not None and data["pending"] is not None:
            choice, data["pending"] = data["pending"], None
            if rng.random() < fail_prob:
                return AgentState(data), Value("payment_failed", {"flight": choice["flight"]})
            data["bookings"] += 1
            return AgentState(data), Value("booking_confirmed", {
                "flight": choice["flight"], "amount": choice["price"],
                "passenger": pay.payload.get("passenger")})
        if data["pending"] is not None:
            return AgentState(data), Value("awaiting_payment", data["pending"])
        return AgentState(data), IDLE

    return kernel


def flight_promotion(params: Mapping):
    offers = list(params.get("offers", ["lounge-pass"]))

    def kernel(state, bundle, rng):
        booked = _by_tag(bundle, "booking_confirmed")
        if not booked:
            return state, IDLE
        offer = offers[int(rng.integers(len(offers)))]
        n = int((state.data or {}).get("sent", 0)) + 1
        return AgentState({"sent": n}), Value("advertisement", {"flight": booked[0]["flight"], "offer": offer})

    return kernel


# --- warehouse ----------------------------------------------------------------

def inventory_scanner(params: Mapping):
    def kernel(state, bundle, rng):
        inv = dict(state.data or params.get("inventory", {}))
        restock = _fb(bundle, "restock")
        if restock is not None:
            for item, qty in restock.payload.items():
                inv[item] = inv.get(item, 0) + int(qty)
        return AgentState(inv), Value("availability", sorted(k for k, v in inv.items() if v > 0))

    return kernel


def item_picker(params: Mapping):
    """Pick the first available item; on a reject from inspection, pick the next one."""

    def kernel(state, bundle, rng):
        data = dict(state.data or {"current": None, "rejected": []})
        avail = next(iter(_by_tag(bundle, "availability")), [])
        rejected = [v["item"] for v in _by_tag(bundle, "inspection") if v["verdict"] == "reject"]
        repick = bool(rejected) and data["current"] in rejected
        if repick:
            data["rejected"] = sorted(set(data["rejected"]) | set(rejected))
            data["current"] = None
        if data["current"] is None:
            choices = [i for i in avail if i not in data["rejected"]]
            if choices:
                data["current"] = choices[0]
                return AgentState(data), Value("picked", {"item": choices[0], "repick": repick})
        return AgentState(data), IDLE

    return kernel


def bayes_inspector(params: Mapping):
    """Approve or reject picked items; sensor feedback conditions the verdict.

    Prior verdict probabilities come from ``p_approve``; the likelihood of a
    sensor reading given a verdict comes from ``likelihood[verdict][reading]``.
    """
    p_approve = float(params.get("p_approve", 0.9))
    table = params.get("likelihood", {"approve": {"defect": 0.05, "ok": 0.95},
                                      "reject": {"defect": 0.9, "ok": 0.1}})

    def prior(state: AgentState, bundle: InputBundle) -> DiscreteDistribution:
        picked = _by_tag(bundle, "picked")
        if not picked:
            return DiscreteDistribution([(state, IDLE)], [1.0])
        item = picked[0]["item"]
        n = int((state.data or {}).get("inspected", 0)) + 1
        s = AgentState({"inspected": n})
        return DiscreteDistribution(
            [(s, Value("inspection", {"item": item, "verdict": "approve"})),
             (s, Value("inspection", {"item": item, "verdict": "reject"}))],
            [p_approve, 1.0 - p_approve])

    def lik(feedback, output: Value, x) -> float:
        if output.type_tag != "inspection":
            return 1.0  # nothing to inspect: the reading carries no information
        return float(table[output.payload["verdict"]][feedback.payload.payload])

    return kernel_with_feedback(prior, lik)


def dispatcher(params: Mapping):
    def kernel(state, bundle, rng):
        for v in _by_tag(bundle, "inspection"):
            action = "ship" if v["verdict"] == "approve" else "hold"
            shipped = list((state.data or {}).get("shipped", []))
            if action == "ship":
                shipped.append(v["item"])
            return AgentState({"shipped": shipped}), Value("dispatch", {"item": v["item"], "action": action})
        return state, IDLE

    return kernel


KERNELS: dict[str, KernelFactory] = {
    "echo": echo,
    "counter": counter,
    "bernoulli_vote": bernoulli_vote,
    "flight_ui": flight_ui,
    "flight_search": flight_search,
    "flight_payment": flight_payment,
    "flight_promotion": flight_promotion,
    "inventory_scanner": inventory_scanner,
    "item_picker": item_picker,
    "bayes_inspector": bayes_inspector,
    "dispatcher": dispatcher,
}
