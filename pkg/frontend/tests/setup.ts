/** Spawns the real session service for the test run. */

import { spawn, type ChildProcess } from "node:child_process";
import { mkdtempSync, rmSync } from "node:fs";
import { createServer } from "node:net";
import { tmpdir } from "node:os";
import { join } from "node:path";
import { fileURLToPath } from "node:url";
import type { TestProject } from "vitest/node";

function freePort(): Promise<number> {
  return new Promise((resolve, reject) => {
    const srv = createServer();
    srv.once("error", reject);
    srv.listen(0, "127.0.0.1", () => {
      const address = srv.address();
      if (address === null || typeof address === "string") {
        reject(new Error("no port assigned"));
        return;
      }
      const port = address.port;
      srv.close(() => resolve(port));
    });
  });
}

async function waitReady(url: string, proc: ChildProcess, timeoutMs: number): Promise<void> {
  const deadline = Date.now() + timeoutMs;
  let lastError: unknown = null;
  while (Date.now() < deadline) {
    if (proc.exitCode !== null) {
      throw new Error(`service exited early with code ${proc.exitCode}`);
    }
    try {
      const response = await fetch(url);
      if (response.ok) return;
    } catch (err) {
      lastError = err;
    }
    await new Promise((r) => setTimeout(r, 150));
  }
  throw new Error(`service not ready after ${timeoutMs}ms: ${String(lastError)}`);
}

export default async function setup(project: TestProject): Promise<() => void> {
  const port = await freePort();
  const store = mkdtempSync(join(tmpdir(), "segedit-ui-store-"));
  const repoRoot = fileURLToPath(new URL("../..", import.meta.url));
  const proc = spawn(
    "python3",
    ["-m", "segedit.serve", "--host", "127.0.0.1", "--port", String(port), "--store", store],
    { cwd: repoRoot, stdio: ["ignore", "ignore", "pipe"] },
  );
  let stderr = "";
  proc.stderr?.on("data", (chunk: Buffer) => {
    stderr += chunk.toString();
    if (stderr.length > 20000) stderr = stderr.slice(-20000);
  });

  const url = `http://127.0.0.1:${port}`;
  try {
    await waitReady(`${url}/v1/stacks`, proc, 30000);
  } catch (err) {
    proc.kill("SIGKILL");
    throw new Error(`${String(err)}\nservice stderr:\n${stderr}`);
  }

  project.provide("serviceUrl", url);

  return () => {
    proc.kill("SIGTERM");
    rmSync(store, { recursive: true, force: true });
  };
}
