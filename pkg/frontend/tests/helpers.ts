// Shared test scaffolding: a synthetic dataset with exactly known
// centroids, and a real trajkd service spawned as a child process so the
// client code is exercised against the live HTTP contract.

import { ChildProcess, spawn, spawnSync } from "node:child_process";
import { mkdtempSync, writeFileSync } from "node:fs";
import { tmpdir } from "node:os";
import { join } from "node:path";

/**
 * 30 objects, 4 frames each; object i has centroid y exactly i (built
 * from binary-exact halves), alternating x sides. For a threshold t the
 * expected "centroid y >= t" count is therefore countAtLeast(t).
 */
export function syntheticCsv(n = 30, frames = 4): string {
  const lines = ["object_id,frame,x,y,z"];
  for (let i = 0; i < n; i++) {
    const side = i % 2 === 0 ? -10 : 10;
    for (let f = 0; f < frames; f++) {
      const x = side + f;
      const y = i - 1.5 + f;
      const z = f * 0.5;
      lines.push(`obj_${String(i).padStart(2, "0")},${f},${x},${y},${z}`);
    }
  }
  return lines.join("\n") + "\n";
}

export function countAtLeast(threshold: number, n = 30): number {
  let count = 0;
  for (let i = 0; i < n; i++) {
    if (i >= threshold) count += 1;
  }
  return count;
}

export function serviceAvailable(): boolean {
  const probe = spawnSync("trajkd", ["--help"], { stdio: "ignore" });
  return probe.status === 0;
}

export interface RunningService {
  base: string;
  stop(): void;
}

export async function startService(port: number): Promise<RunningService> {
  const dir = mkdtempSync(join(tmpdir(), "trajkd-ui-test-"));
  const configPath = join(dir, "service.json");
  writeFileSync(configPath, JSON.stringify({
    host: "127.0.0.1",
    port,
    data_dir: join(dir, "data"),
  }));
  const child: ChildProcess = spawn("trajkd", ["serve", "--config", configPath],
                                    { stdio: "ignore" });
  const base = `http://127.0.0.1:${port}`;
  const deadline = Date.now() + 20000;
  for (;;) {
    try {
      const resp = await fetch(`${base}/health`);
      if (resp.ok) break;
    } catch {
      // not up yet
    }
    if (Date.now() > deadline) {
      child.kill();
      throw new Error("service did not come up in time");
    }
    await new Promise((resolve) => setTimeout(resolve, 200));
  }
  return {
    base,
    stop() {
      child.kill();
    },
  };
}
