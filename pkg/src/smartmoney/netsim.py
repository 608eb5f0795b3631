"""Simulated network of ledger nodes.

Two schedulers drive the same flow generators:

``deterministic``
    A seeded discrete-event loop in virtual time. Same-time events are
    ordered by a seeded random key, so a seed fixes the interleaving and the
    resulting event log byte for byte. Node processing costs (``CostModel``)
    and message latency advance the virtual clock.

``concurrent``
    One OS thread per node worker, queues between them, wall-clock time.
    Modelled costs, if any, are spent with ``time.sleep``.

Each node has a fixed number of workers (one by default: flows on a node
run one step at a time). A step is one resumption of a flow or responder
generator; its service time is ``CostModel.flow_step_s`` plus whatever the
step charged for signing, verification and vault access.
"""
from __future__ import annotations

import dataclasses
import heapq
import inspect
import itertools
import json
import random
import threading
import time
from collections import deque
from concurrent.futures import Future
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Callable, Iterable, Mapping

try:
    import tomllib
except ImportError:  # Python < 3.11
    import tomli as tomllib

from . import contracts
from .contracts import ContractRules
from .errors import (
    ConfigError,
    DeadlockDetected,
    DuplicateNode,
    MissingNotary,
    MissingRole,
    QueueOverflow,
    SessionFailure,
    UnknownAccount,
    WrongNode,
)
from .flows import FLOWS, INSTALLED, RESPONDERS, FlowKind, FlowRequest, FlowResult, Request, always_approve
from .ledger import Ledger
from .model import AccountKind, AccountRef, InvoiceState, MoneyKind, Role, SignedTransaction

DETERMINISTIC = "deterministic"
CONCURRENT = "concurrent"


@dataclass(frozen=True)
class CostModel:
    """Service time, in seconds, charged to the node doing the work."""

    flow_step_s: float = 0.0
    sign_s: float = 0.0
    verify_sig_s: float = 0.0
    verify_line_s: float = 0.0
    vault_query_s: float = 0.0
    vault_write_s: float = 0.0
    commit_s: float = 0.0

    @classmethod
    def corda_like(cls) -> CostModel:
        # Order-of-magnitude figures for a JVM ledger node: a flow checkpoint
        # per suspension, EdDSA-class signatures, an indexed DB query.
        return cls(
            flow_step_s=2e-3,
            sign_s=0.2e-3,
            verify_sig_s=0.4e-3,
            verify_line_s=4e-6,
            vault_query_s=1.5e-3,
            vault_write_s=0.5e-3,
            commit_s=1e-3,
        )


@dataclass(frozen=True)
class NodeConfig:
    role: Role
    workers: int = 1
    address: str | None = None

    @property
    def name(self) -> str:
        return self.role.value


def default_nodes() -> tuple[NodeConfig, ...]:
    return tuple(NodeConfig(role) for role in Role)


@dataclass(frozen=True)
class Fault:
    """A delivery fault. ``kind`` is drop-session, delay, node-pause or node-resume.

    ``src``/``dst``/``handler`` select messages (None matches any);
    ``count`` bounds how many messages a drop applies to; ``at_s`` activates
    the fault at a virtual time instead of immediately; ``duration_s`` ends
    a pause or delay.
    """

    kind: str
    src: str | None = None
    dst: str | None = None
    handler: str | None = None
    delay_ms: float = 0.0
    node: str | None = None
    count: int | None = None
    at_s: float | None = None
    duration_s: float | None = None

    def __post_init__(self):
        if self.kind not in ("drop-session", "delay", "node-pause", "node-resume"):
            raise ConfigError(f"unknown fault kind {self.kind!r}")
        if self.kind.startswith("node-") and self.node is None:
            raise ConfigError(f"{self.kind} needs a node")

    def matches(self, msg: Message) -> bool:
        return (
            (self.src is None or self.src == msg.src)
            and (self.dst is None or self.dst == msg.dst)
            and (self.handler is None or self.handler == msg.handler)
        )


@dataclass(frozen=True)
class NetworkConfig:
    nodes: tuple[NodeConfig, ...] = field(default_factory=default_nodes)
    seed: int = 0
    mode: str = DETERMINISTIC
    latency_s: float = 0.0
    jitter_s: float = 0.0
    bandwidth_bytes_s: float | None = None
    cost: CostModel = CostModel()
    split_enabled: bool = True
    rules: ContractRules = field(default_factory=ContractRules)
    session_timeout_s: float = 5.0
    client_queue_limit: int = 100_000
    faults: tuple[Fault, ...] = ()

    def __post_init__(self):
        if self.mode not in (DETERMINISTIC, CONCURRENT):
            raise ConfigError(f"unknown scheduler mode {self.mode!r}")

    @classmethod
    def from_dict(cls, data: Mapping[str, Any]) -> NetworkConfig:
        data = dict(data)
        kwargs: dict[str, Any] = {}
        if "nodes" in data:
            nodes = []
            for entry in data.pop("nodes"):
                if isinstance(entry, str):
                    entry = {"role": entry}
                entry = dict(entry)
                role = entry.pop("role", None) or entry.pop("name")
                try:
                    nodes.append(NodeConfig(Role(role), **entry))
                except ValueError:
                    raise ConfigError(f"unknown node role {role!r}") from None
            kwargs["nodes"] = tuple(nodes)
        if "cost" in data:
            cost = data.pop("cost")
            kwargs["cost"] = CostModel.corda_like() if cost == "corda_like" else CostModel(**cost)
        if "faults" in data:
            kwargs["faults"] = tuple(Fault(**f) for f in data.pop("faults"))
        if "vat_rates" in data or "allowed_goods" in data:
            rules = {}
            if "vat_rates" in data:
                rules["vat_rates"] = data.pop("vat_rates")
            if "allowed_goods" in data:
                rules["allowed_goods"] = frozenset(data.pop("allowed_goods"))
            kwargs["rules"] = ContractRules(**rules)
        known = {f.name for f in dataclasses.fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise ConfigError(f"unknown network config keys: {sorted(unknown)}")
        kwargs.update(data)
        return cls(**kwargs)

    @classmethod
    def load(cls, path: str | Path) -> NetworkConfig:
        path = Path(path)
        if path.suffix == ".toml":
            data = tomllib.loads(path.read_text())
        else:
            data = json.loads(path.read_text())
        return cls.from_dict(data)


# -- runtime objects ------------------------------------------------------

class Node:
    def __init__(self, cfg: NodeConfig):
        self.name = cfg.name
        self.role = cfg.role
        self.workers = cfg.workers
        self.address = cfg.address or f"sim://{cfg.name}"
        self.handlers = INSTALLED[cfg.role]
        self.tx_store: dict[str, SignedTransaction] = {}
        self.state: dict[str, Any] = {}
        self.paused = False
        # deterministic scheduler bookkeeping
        self.ready: deque = deque()
        self.free = cfg.workers


@dataclass
class ClientEndpoint:
    client_id: str
    node: str
    limit: int
    pending: int = 0


@dataclass
class Message:
    src: str
    dst: str
    handler: str
    payload: Any
    task: Task
    is_reply: bool = False
    error: BaseException | None = None
    size: int = 256


class _Record:
    __slots__ = ("kind", "submitted_at", "notarized_at", "client")

    def __init__(self, kind, submitted_at, client):
        self.kind = kind
        self.submitted_at = submitted_at
        self.notarized_at = None
        self.client = client


class Task:
    __slots__ = ("gen", "node", "ctx", "parent", "record", "future", "started")

    def __init__(self, node: Node, parent: Task | None = None, record: _Record | None = None, future=None):
        self.gen = None
        self.node = node
        self.ctx = None
        self.parent = parent
        self.record = record
        self.future = future
        self.started = False


class FlowContext:
    """What a running flow or responder sees of its node."""

    def __init__(self, net: Network, node: Node, task: Task, origin: str | None = None, split: bool = True):
        self.net = net
        self.node = node.name
        self.ledger = net.ledger
        self.rules = net.rules
        self.split = split
        self.tx_store = node.tx_store
        self.node_state = node.state
        self.origin = origin
        self.approval_policy = net.approval_policy
        self.cost = net.config.cost
        self._task = task
        self.spent = 0.0

    def now(self) -> float:
        return self.net.now()

    def charge(self, seconds: float) -> None:
        self.spent += seconds

    def charge_sign(self, n: int) -> None:
        self.spent += n * self.cost.sign_s

    def charge_sigs(self, n: int) -> None:
        self.spent += n * self.cost.verify_sig_s

    def charge_commit(self) -> None:
        self.spent += self.cost.commit_s

    def charge_query(self) -> None:
        self.spent += self.cost.vault_query_s

    def verify(self, tx: SignedTransaction, inputs) -> None:
        lines = sum(len(s.lines) for s in (*tx.outputs, *inputs) if isinstance(s, InvoiceState))
        self.spent += lines * self.cost.verify_line_s + len(tx.signatures) * self.cost.verify_sig_s
        contracts.verify(tx, inputs, self.rules, self.ledger.accounts)

    def sign(self, tx: SignedTransaction, parties) -> SignedTransaction:
        self.charge_sign(len(parties))
        return self.ledger.sign(tx, parties)

    def query(self, account: AccountRef, linear_id: str):
        self.charge_query()
        return self.ledger.vault_lookup(account, linear_id)

    def balance(self, account: AccountRef, kind: MoneyKind) -> int:
        self.charge_query()
        return self.ledger.get_balance(account, kind)

    def write(self, tx: SignedTransaction, accounts) -> None:
        accounts = list(accounts)
        n = sum(1 for s in tx.outputs for a in accounts if a in s.participants)
        self.spent += n * self.cost.vault_write_s
        self.ledger.record_transaction(tx, accounts)

    def notarised(self, result) -> None:
        if self._task.record is not None:
            self._task.record.notarized_at = result.wall_time


def _responder(fn, ctx, payload):
    res = fn(ctx, payload)
    if inspect.isgenerator(res):
        res = yield from res
    return res


# -- schedulers -----------------------------------------------------------

class _Scheduler:
    def __init__(self, net: Network):
        self.net = net
        self.rng = random.Random(net.config.seed)
        self._rng_lock = threading.Lock()

    # subclass hooks: now(), enqueue(node, task, value, exc), later(delay, fn, *args)

    def latency(self, msg: Message) -> float:
        cfg = self.net.config
        delay = cfg.latency_s
        if cfg.jitter_s:
            with self._rng_lock:
                delay += self.rng.uniform(0.0, cfg.jitter_s)
        if cfg.bandwidth_bytes_s:
            delay += msg.size / cfg.bandwidth_bytes_s
        return delay

    def step(self, task: Task, value, exc) -> tuple[tuple, float]:
        ctx = task.ctx
        ctx.spent = self.net.config.cost.flow_step_s
        try:
            if exc is not None:
                effect = task.gen.throw(exc)
            elif task.started:
                effect = task.gen.send(value)
            else:
                task.started = True
                effect = next(task.gen)
        except StopIteration as stop:
            outcome = ("done", stop.value)
        except Exception as err:  # flow failure, propagated to the caller
            outcome = ("error", err)
        else:
            if isinstance(effect, Request):
                outcome = ("request", effect)
            else:
                outcome = ("error", TypeError(f"flow yielded {effect!r}, expected Request"))
        return outcome, ctx.spent

    def dispatch(self, task: Task, outcome: tuple) -> None:
        what, value = outcome
        net = self.net
        if what == "request":
            target = net.nodes.get(value.to)
            if target is None:
                self.enqueue(task.node, task, None, SessionFailure(f"no route to {value.to}"))
                return
            msg = Message(task.node.name, value.to, value.handler, value.payload, task, size=value.wire_size)
            self.send(msg)
            return
        error = value if what == "error" else None
        result = None if what == "error" else value
        if task.parent is not None:
            size = getattr(result, "wire_size", 256) if result is not None else 256
            msg = Message(task.node.name, task.parent.node.name, "reply", result, task.parent, True, error, size)
            self.send(msg)
        else:
            net._finish(task, result, error)

    def send(self, msg: Message) -> None:
        net = self.net
        extra = 0.0
        for fault in list(net.active_faults):
            if not fault.matches(msg):
                continue
            if fault.kind == "drop-session":
                net._consume_fault(fault)
                waiting = msg.task
                failure = SessionFailure(f"session {msg.src}->{msg.dst} ({msg.handler}) dropped")
                self.later(net.config.session_timeout_s, self.enqueue, waiting.node, waiting, None, failure)
                return
            if fault.kind == "delay":
                extra += fault.delay_ms / 1000.0
        self.later(self.latency(msg) + extra, self.deliver, msg)

    def deliver(self, msg: Message) -> None:
        dst = self.net.nodes[msg.dst]
        if msg.is_reply:
            self.enqueue(dst, msg.task, msg.payload, msg.error)
            return
        if msg.handler not in dst.handlers:
            failure = SessionFailure(f"{msg.dst} has no responder for {msg.handler!r}")
            reply = Message(msg.dst, msg.src, "reply", None, msg.task, True, failure)
            self.send(reply)
            return
        task = Task(dst, parent=msg.task)
        task.ctx = FlowContext(self.net, dst, task, origin=msg.src, split=msg.task.ctx.split)
        task.gen = _responder(RESPONDERS[msg.handler], task.ctx, msg.payload)
        self.enqueue(dst, task, None, None)


class DeterministicScheduler(_Scheduler):
    def __init__(self, net: Network):
        super().__init__(net)
        self.clock = 0.0
        self._heap: list = []
        self._seq = itertools.count()

    def now(self) -> float:
        return self.clock

    def later(self, delay: float, fn: Callable, *args) -> None:
        heapq.heappush(self._heap, (self.clock + delay, self.rng.random(), next(self._seq), fn, args))

    def enqueue(self, node: Node, task: Task, value, exc) -> None:
        node.ready.append((task, value, exc))
        self.kick(node)

    def kick(self, node: Node) -> None:
        while node.free > 0 and node.ready and not node.paused:
            node.free -= 1
            self.later(0.0, self._execute, node, node.ready.popleft())

    def _execute(self, node: Node, item) -> None:
        task, value, exc = item
        outcome, cost = self.step(task, value, exc)
        self.later(cost, self._complete, node, task, outcome)

    def _complete(self, node: Node, task: Task, outcome) -> None:
        node.free += 1
        self.dispatch(task, outcome)
        self.kick(node)

    def run_until_idle(self, max_events: int | None = None) -> None:
        events = 0
        while self._heap:
            t, _, _, fn, args = heapq.heappop(self._heap)
            self.clock = max(self.clock, t)
            fn(*args)
            events += 1
            if max_events is not None and events >= max_events:
                return
        if self.net.live_flows and not any(n.paused for n in self.net.nodes.values()):
            raise DeadlockDetected(f"{self.net.live_flows} flow(s) wait for messages no node will send")

    def close(self) -> None:
        pass


class ConcurrentScheduler(_Scheduler):
    def __init__(self, net: Network):
        super().__init__(net)
        import queue

        self._t0 = time.perf_counter()
        self._queues = {name: queue.Queue() for name in net.nodes}
        self._threads: list[threading.Thread] = []
        self._timers: list = []
        self._timer_cv = threading.Condition()
        self._seq = itertools.count()
        self._closed = False
        for name, node in net.nodes.items():
            for i in range(node.workers):
                t = threading.Thread(target=self._worker, args=(node,), name=f"{name}-w{i}", daemon=True)
                t.start()
                self._threads.append(t)
        self._timer_thread = threading.Thread(target=self._timer_loop, name="net-timers", daemon=True)
        self._timer_thread.start()

    def now(self) -> float:
        return time.perf_counter() - self._t0

    def enqueue(self, node: Node, task: Task, value, exc) -> None:
        self._queues[node.name].put((task, value, exc))

    def later(self, delay: float, fn: Callable, *args) -> None:
        if delay <= 0:
            fn(*args)
            return
        with self._timer_cv:
            heapq.heappush(self._timers, (time.perf_counter() + delay, next(self._seq), fn, args))
            self._timer_cv.notify()

    def _timer_loop(self) -> None:
        while True:
            with self._timer_cv:
                while not self._closed and (not self._timers or self._timers[0][0] > time.perf_counter()):
                    timeout = self._timers[0][0] - time.perf_counter() if self._timers else None
                    self._timer_cv.wait(timeout)
                if self._closed:
                    return
                _, _, fn, args = heapq.heappop(self._timers)
            fn(*args)

    def _worker(self, node: Node) -> None:
        q = self._queues[node.name]
        while True:
            item = q.get()
            if item is None:
                return
            task, value, exc = item
            outcome, cost = self.step(task, value, exc)
            if cost > 0:
                time.sleep(cost)
            self.dispatch(task, outcome)

    def run_until_idle(self, timeout: float | None = None) -> None:
        if not self.net.wait_idle(timeout):
            raise TimeoutError(f"{self.net.live_flows} flow(s) still running after {timeout}s")

    def close(self) -> None:
        with self._timer_cv:
            self._closed = True
            self._timer_cv.notify_all()
        for name, node in self.net.nodes.items():
            for _ in range(node.workers):
                self._queues[name].put(None)
        for t in self._threads:
            t.join(timeout=5)


# -- network --------------------------------------------------------------

GOV_ACCOUNTS = (
    (Role.HMRC, "VATPayments", AccountKind.GOV_PAYMENTS),
    (Role.HMRC, "VATInvestigator", AccountKind.GOV_INVESTIGATOR),
    (Role.LEGAL, "LegalAuthority", AccountKind.LEGAL_AUTHORITY),
)


def _validate_nodes(nodes: Iterable[NodeConfig]) -> None:
    seen: set[str] = set()
    for cfg in nodes:
        if cfg.name in seen:
            raise DuplicateNode(f"node {cfg.name} configured twice")
        if cfg.workers < 1:
            raise ConfigError(f"{cfg.name}: workers must be >= 1")
        seen.add(cfg.name)
    if Role.NOTARY.value not in seen:
        raise MissingNotary("network has no Notary node")
    missing = [r.value for r in Role if r.value not in seen]
    if missing:
        raise MissingRole(f"network lacks roles: {missing}")


class Network:
    """A running simulated network: nodes, a shared ledger and a scheduler."""

    def __init__(self, config: NetworkConfig = NetworkConfig()):
        _validate_nodes(config.nodes)
        self.config = config
        self.nodes = {cfg.name: Node(cfg) for cfg in config.nodes}
        self.rules = config.rules
        self.split_enabled = config.split_enabled
        self.approval_policy: Callable[[SignedTransaction], bool] = always_approve
        self.active_faults: list[Fault] = []
        self._fault_budget: dict[int, int] = {}
        self._clients: dict[str, ClientEndpoint] = {}
        self._lock = threading.Lock()
        self._idle = threading.Condition(self._lock)
        self.live_flows = 0
        if config.mode == DETERMINISTIC:
            self.scheduler: _Scheduler = DeterministicScheduler(self)
        else:
            self.scheduler = ConcurrentScheduler(self)
        self.ledger = Ledger(nodes=tuple(self.nodes), clock=self.now)
        for role, name, kind in GOV_ACCOUNTS:
            self.ledger.create_account(role.value, name, kind)
        for fault in config.faults:
            self.inject_fault(fault)

    # -- lifecycle --------------------------------------------------------

    @property
    def deterministic(self) -> bool:
        return self.config.mode == DETERMINISTIC

    def now(self) -> float:
        return self.scheduler.now()

    def close(self) -> None:
        self.scheduler.close()

    def __enter__(self) -> Network:
        return self

    def __exit__(self, *exc) -> None:
        self.close()

    # -- accounts ---------------------------------------------------------

    def create_account(self, node: str, name: str, kind: AccountKind | str) -> AccountRef:
        return self.ledger.create_account(node, name, kind)

    def account(self, name: str, node: str | None = None) -> AccountRef:
        return self.ledger.find_account(name, node)

    @property
    def vat_payments(self) -> AccountRef:
        return self.ledger.account_of_kind(AccountKind.GOV_PAYMENTS)

    @property
    def vat_investigator(self) -> AccountRef:
        return self.ledger.account_of_kind(AccountKind.GOV_INVESTIGATOR)

    @property
    def legal_authority(self) -> AccountRef:
        return self.ledger.account_of_kind(AccountKind.LEGAL_AUTHORITY)

    # -- clients and flows ------------------------------------------------

    def client(self, node: str, client_id: str | None = None) -> ClientEndpoint:
        if node not in self.nodes:
            raise ConfigError(f"unknown node {node}")
        client_id = client_id or f"rpc@{node}"
        with self._lock:
            ep = self._clients.get(client_id)
            if ep is None:
                ep = ClientEndpoint(client_id, node, self.config.client_queue_limit)
                self._clients[client_id] = ep
            elif ep.node != node:
                raise WrongNode(f"client {client_id} is attached to {ep.node}")
        return ep

    def submit_flow(self, client: ClientEndpoint, request: FlowRequest) -> Future:
        """Enqueue ``request``; the returned future resolves to a :class:`FlowResult`."""
        initiator = self.ledger.account(request.initiator)
        if initiator.host_node != client.node:
            raise WrongNode(f"{initiator} is hosted on {initiator.host_node}, not {client.node}")
        node = self.nodes[client.node]
        fut: Future = Future()
        with self._lock:
            if client.pending >= client.limit:
                raise QueueOverflow(f"client {client.client_id} has {client.pending} pending requests")
            client.pending += 1
            self.live_flows += 1
        record = _Record(request.kind, self.now(), client)
        task = Task(node, record=record, future=fut)
        task.ctx = FlowContext(self, node, task, split=self.split_enabled)
        task.gen = FLOWS[FlowKind(request.kind)](task.ctx, initiator, **request.payload)
        self.scheduler.enqueue(node, task, None, None)
        return fut

    def _finish(self, task: Task, value, error) -> None:
        rec = task.record
        result = FlowResult(
            kind=rec.kind,
            ok=error is None,
            value=value,
            error=error,
            submitted_at=rec.submitted_at,
            notarized_at=rec.notarized_at if error is None else None,
            finished_at=self.now(),
        )
        with self._lock:
            rec.client.pending -= 1
        task.future.set_result(result)
        with self._lock:
            self.live_flows -= 1
            if self.live_flows == 0:
                self._idle.notify_all()

    def wait_idle(self, timeout: float | None = None) -> bool:
        with self._idle:
            return self._idle.wait_for(lambda: self.live_flows == 0, timeout)

    def run_until_idle(self, timeout: float | None = None) -> None:
        if self.deterministic:
            self.scheduler.run_until_idle()
        else:
            self.scheduler.run_until_idle(timeout)

    def run_flow(self, request: FlowRequest, client: ClientEndpoint | None = None, timeout: float | None = 60.0) -> FlowResult:
        initiator = self.ledger.account(request.initiator)
        client = client or self.client(initiator.host_node)
        fut = self.submit_flow(client, request)
        if self.deterministic:
            self.scheduler.run_until_idle()
            if not fut.done():
                raise DeadlockDetected("flow did not complete; is a node paused?")
        return fut.result(timeout)

    # -- faults -----------------------------------------------------------

    def inject_fault(self, fault: Fault) -> None:
        if not self.deterministic:
            raise ConfigError("fault injection needs the deterministic scheduler")
        if fault.at_s is not None and fault.at_s > self.now():
            delay = fault.at_s - self.now()
            self.scheduler.later(delay, self.inject_fault, dataclasses.replace(fault, at_s=None))
            return
        if fault.kind == "node-pause":
            self.nodes[fault.node].paused = True
            if fault.duration_s is not None:
                self.scheduler.later(fault.duration_s, self.inject_fault, Fault("node-resume", node=fault.node))
        elif fault.kind == "node-resume":
            node = self.nodes[fault.node]
            node.paused = False
            self.scheduler.kick(node)
        else:
            self.active_faults.append(fault)
            if fault.count is not None:
                self._fault_budget[id(fault)] = fault.count
            if fault.duration_s is not None:
                self.scheduler.later(fault.duration_s, self.clear_fault, fault)

    def clear_fault(self, fault: Fault | None = None) -> None:
        if fault is None:
            self.active_faults.clear()
        elif fault in self.active_faults:
            self.active_faults.remove(fault)

    def _consume_fault(self, fault: Fault) -> None:
        left = self._fault_budget.get(id(fault))
        if left is not None:
            left -= 1
            self._fault_budget[id(fault)] = left
            if left <= 0:
                self.active_faults.remove(fault)

    # -- convenience wrappers for the business flows ----------------------

    def issue_invoice(self, seller, buyer, lines, money_kind=MoneyKind.CURRENT) -> FlowResult:
        return self.run_flow(FlowRequest.issue_invoice(self.ledger.account(seller), buyer, lines, money_kind))

    def pay_invoice(self, buyer, invoice_id: str) -> FlowResult:
        return self.run_flow(FlowRequest.pay_invoice(self.ledger.account(buyer), invoice_id))

    def pay_invoice_with_tokens(self, buyer, invoice_id: str) -> FlowResult:
        return self.run_flow(FlowRequest.pay_invoice(self.ledger.account(buyer), invoice_id, tokens=True))

    def issue_tokens(self, issuer_node: str, recipient, amount: int) -> FlowResult:
        hosted = self.ledger.hosted_accounts(issuer_node)
        if not hosted:
            raise UnknownAccount(f"no account on {issuer_node} to initiate issuance")
        issuer = next((a for a in hosted if a.kind is AccountKind.GOV_PAYMENTS), hosted[0])
        return self.run_flow(FlowRequest.issue_tokens(issuer, recipient, amount))

    def request_warrant(self, requester, subject, authorizer=None) -> FlowResult:
        return self.run_flow(FlowRequest.request_warrant(self.ledger.account(requester), subject, authorizer))

    def execute_warrant(self, requester, warrant_id: str, authorizer=None) -> FlowResult:
        return self.run_flow(FlowRequest.execute_warrant(self.ledger.account(requester), warrant_id, authorizer))

    def get_balance(self, account, kind: MoneyKind | str = MoneyKind.CURRENT) -> int:
        return self.ledger.get_balance(account, kind)

    def vault_query(self, account, kind=None, status=None, counterparty=None):
        return self.ledger.vault_query(account, kind, status, counterparty)


def start_network(config: NetworkConfig | None = None, **overrides) -> Network:
    config = config or NetworkConfig()
    if overrides:
        config = dataclasses.replace(config, **overrides)
    return Network(config)


def inject_fault(network: Network, fault: Fault) -> None:
    network.inject_fault(fault)


def run_until_idle(network: Network) -> None:
    network.run_until_idle()
