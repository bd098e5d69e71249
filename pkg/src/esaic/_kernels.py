"""Compiled inner loops for tabular Q-learning on the rendezvous grid.

Each kernel seeds numba's own generator from ``seed`` on entry, so a run is a
pure function of its arguments. Greedy choices break ties toward the lowest
action index.
"""

import numpy as np
from numba import njit

N_ACTIONS = 5


@njit(cache=True)
def argmax_row(q, row):
    best = 0
    best_val = q[row, 0]
    for a in range(1, q.shape[1]):
        if q[row, a] > best_val:
            best_val = q[row, a]
            best = a
    return best


@njit(cache=True)
def max_row(q, row):
    best_val = q[row, 0]
    for a in range(1, q.shape[1]):
        if q[row, a] > best_val:
            best_val = q[row, a]
    return best_val


@njit(cache=True)
def _sample_start(pos, n_cells, goal):
    for i in range(pos.shape[0]):
        c = np.random.randint(0, n_cells - 1)
        if c >= goal:
            c += 1
        pos[i] = c


@njit(cache=True)
def _encode(pos, n_cells):
    s = 0
    for i in range(pos.shape[0]):
        s = s * n_cells + pos[i]
    return s


@njit(cache=True)
def _apply_joint(pos, a, moves, goal):
    """Move agents in place by joint action ``a``; return the goal count."""
    n = pos.shape[0]
    at_goal = 0
    for i in range(n - 1, -1, -1):
        ai = a % N_ACTIONS
        a //= N_ACTIONS
        pos[i] = moves[pos[i], ai]
        if pos[i] == goal:
            at_goal += 1
    return at_goal


@njit(cache=True)
def _reward(at_goal, n_agents, c1, c2):
    if at_goal == 0:
        return 0.0
    if at_goal == n_agents:
        return c2
    return c1


@njit(cache=True)
def _update(q, row, a, target, alpha, optimistic):
    if optimistic:
        if target > q[row, a]:
            q[row, a] = target
    else:
        q[row, a] += alpha * (target - q[row, a])


@njit(cache=True)
def train_centralized(q, moves, n_agents, goal, c1, c2, gamma, alpha, episodes, max_steps, seed, optimistic):
    """Joint-action epsilon-greedy Q-learning; ``q`` is updated in place."""
    np.random.seed(seed)
    n_cells = moves.shape[0]
    n_joint = q.shape[1]
    returns = np.zeros(episodes)
    eps_trace = np.zeros(episodes)
    pos = np.zeros(n_agents, dtype=np.int64)
    for k in range(1, episodes + 1):
        eps = (100.0 * episodes - 99.0 * k) / (100.0 * episodes)
        eps_trace[k - 1] = eps
        _sample_start(pos, n_cells, goal)
        s = _encode(pos, n_cells)
        g = 0.0
        disc = 1.0
        for _ in range(max_steps):
            if np.random.random() < eps:
                a = np.random.randint(0, n_joint)
            else:
                a = argmax_row(q, s)
            at_goal = _apply_joint(pos, a, moves, goal)
            r = _reward(at_goal, n_agents, c1, c2)
            s2 = _encode(pos, n_cells)
            if at_goal > 0:
                target = r
            else:
                target = r + gamma * max_row(q, s2)
            _update(q, s, a, target, alpha, optimistic)
            g += disc * r
            disc *= gamma
            s = s2
            if at_goal > 0:
                break
        returns[k - 1] = g
    return returns, eps_trace


@njit(cache=True)
def eval_centralized(q, moves, goal, c1, c2, gamma, max_steps, starts):
    """Greedy returns from each row of ``starts`` (shape ``(E, n_agents)``)."""
    n_cells = moves.shape[0]
    n_agents = starts.shape[1]
    out = np.zeros(starts.shape[0])
    pos = np.zeros(n_agents, dtype=np.int64)
    for e in range(starts.shape[0]):
        for i in range(n_agents):
            pos[i] = starts[e, i]
        g = 0.0
        disc = 1.0
        for _ in range(max_steps):
            a = argmax_row(q, _encode(pos, n_cells))
            at_goal = _apply_joint(pos, a, moves, goal)
            g += disc * _reward(at_goal, n_agents, c1, c2)
            disc *= gamma
            if at_goal > 0:
                break
        out[e] = g
    return out


@njit(cache=True)
def _local_rows(rows, pos, offsets, strides, msg):
    """Row of each agent's table for its own cell plus the codewords it hears.

    ``strides[i, 0]`` scales the own cell; ``strides[i, j]`` (j != i) scales the
    codeword agent ``j`` sends to ``i``; ``msg[j, i, cell]`` is that codeword.
    """
    n = pos.shape[0]
    for i in range(n):
        r = offsets[i] + pos[i] * strides[i, i]
        for j in range(n):
            if j != i:
                r += msg[j, i, pos[j]] * strides[i, j]
        rows[i] = r


@njit(cache=True)
def train_distributed(q, offsets, strides, msg, moves, goal, c1, c2, gamma, alpha, episodes, max_steps, seed, optimistic):
    """Independent per-agent Q-learning over (own cell, received codewords).

    All agents' tables live in ``q`` stacked row-wise at ``offsets``. Messages
    are encoded from the current cells and delivered within the same step.
    """
    np.random.seed(seed)
    n_cells = moves.shape[0]
    n_agents = offsets.shape[0]
    returns = np.zeros(episodes)
    eps_trace = np.zeros(episodes)
    pos = np.zeros(n_agents, dtype=np.int64)
    rows = np.zeros(n_agents, dtype=np.int64)
    rows2 = np.zeros(n_agents, dtype=np.int64)
    acts = np.zeros(n_agents, dtype=np.int64)
    for k in range(1, episodes + 1):
        eps = (100.0 * episodes - 99.0 * k) / (100.0 * episodes)
        eps_trace[k - 1] = eps
        _sample_start(pos, n_cells, goal)
        _local_rows(rows, pos, offsets, strides, msg)
        g = 0.0
        disc = 1.0
        for _ in range(max_steps):
            for i in range(n_agents):
                if np.random.random() < eps:
                    acts[i] = np.random.randint(0, N_ACTIONS)
                else:
                    acts[i] = argmax_row(q, rows[i])
            at_goal = 0
            for i in range(n_agents):
                pos[i] = moves[pos[i], acts[i]]
                if pos[i] == goal:
                    at_goal += 1
            r = _reward(at_goal, n_agents, c1, c2)
            _local_rows(rows2, pos, offsets, strides, msg)
            for i in range(n_agents):
                if at_goal > 0:
                    target = r
                else:
                    target = r + gamma * max_row(q, rows2[i])
                _update(q, rows[i], acts[i], target, alpha, optimistic)
                rows[i] = rows2[i]
            g += disc * r
            disc *= gamma
            if at_goal > 0:
                break
        returns[k - 1] = g
    return returns, eps_trace


@njit(cache=True)
def eval_distributed(q, offsets, strides, msg, moves, goal, c1, c2, gamma, max_steps, starts):
    n_agents = offsets.shape[0]
    out = np.zeros(starts.shape[0])
    pos = np.zeros(n_agents, dtype=np.int64)
    rows = np.zeros(n_agents, dtype=np.int64)
    for e in range(starts.shape[0]):
        for i in range(n_agents):
            pos[i] = starts[e, i]
        g = 0.0
        disc = 1.0
        for _ in range(max_steps):
            _local_rows(rows, pos, offsets, strides, msg)
            at_goal = 0
            for i in range(n_agents):
                pos[i] = moves[pos[i], argmax_row(q, rows[i])]
                if pos[i] == goal:
                    at_goal += 1
            g += disc * _reward(at_goal, n_agents, c1, c2)
            disc *= gamma
            if at_goal > 0:
                break
        out[e] = g
    return out
