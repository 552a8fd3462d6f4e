from __future__ import annotations

from collections import deque

from swimtrack.sim.dynamics import NEUTRAL_COMMAND, RateCommand


class DelayLine:
    """Actuation delay of a fixed number of control steps.

    ``push`` at step t followed by ``pop`` at step t + delay_steps returns
    the pushed command. Before anything matures, ``pop`` returns the neutral
    command; afterwards it holds the most recent matured command.
    """

    def __init__(self, delay_steps: int, neutral: RateCommand = NEUTRAL_COMMAND):
        if delay_steps < 0:
            raise ValueError("delay_steps must be >= 0")
        self.delay_steps = int(delay_steps)
        self.queue: deque[tuple[int, RateCommand]] = deque()
        self.current = neutral
        self._last_push: int | None = None
        self._last_pop: int | None = None

    def push(self, command: RateCommand, t: int) -> None:
        if self._last_push is not None and t <= self._last_push:
            raise ValueError(f"push at step {t} after step {self._last_push}")
        self._last_push = t
        self.queue.append((t + self.delay_steps, command))
        if len(self.queue) > self.delay_steps + 1:
            # only reachable when pops are skipped; drop what can never be read
            self.current = self.queue.popleft()[1]

    def pop(self, t: int) -> RateCommand:
        if self._last_pop is not None and t <= self._last_pop:
            raise ValueError(f"pop at step {t} after step {self._last_pop}")
        self._last_pop = t
        while self.queue and self.queue[0][0] <= t:
            self.current = self.queue.popleft()[1]
        return self.current

    def pending(self) -> list[RateCommand]:
        """Commands pushed but not yet released, oldest first."""
        return [c for _, c in self.queue]
