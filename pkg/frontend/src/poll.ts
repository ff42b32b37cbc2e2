// Polling loop for live refresh; the interval is configurable and a tick
// can be forced after local mutations.

export class Poller {
  private timer: ReturnType<typeof setInterval> | null = null
  private running = false

  constructor(
    private readonly tick: () => Promise<void>,
    readonly intervalMs = 5000,
  ) {}

  start(): void {
    if (this.timer) return
    void this.fire()
    this.timer = setInterval(() => void this.fire(), this.intervalMs)
  }

  stop(): void {
    if (this.timer) clearInterval(this.timer)
    this.timer = null
  }

  async fire(): Promise<void> {
    if (this.running) return // never overlap slow ticks
    this.running = true
    try {
      await this.tick()
    } finally {
      this.running = false
    }
  }
}
