// Scripted session against a live server: create, follow the recommendation,
// record two outcomes, and compare the displayed entropy with the CLI's walk
// over the exported plan.
import { afterAll, beforeAll, describe, expect, it } from "vitest";
import { type ChildProcess, spawn } from "node:child_process";
import { mkdtempSync, readFileSync, writeFileSync } from "node:fs";
import { tmpdir } from "node:os";
import { dirname, join } from "node:path";
import { fileURLToPath } from "node:url";

import { SessionApi } from "../src/api.js";
import { renderStateHtml } from "../src/render.js";
import type { SessionState } from "../src/types.js";

const here = dirname(fileURLToPath(import.meta.url));
const repoRoot = join(here, "..", "..");
const fig2Path = join(repoRoot, "fixtures", "fig2.pl");
const program = readFileSync(fig2Path, "utf8");

const port = 8760 + (process.pid % 100);
const base = `http://127.0.0.1:${port}`;
let server: ChildProcess;

async function waitForServer(): Promise<void> {
  for (let attempt = 0; attempt < 120; attempt++) {
    try {
      const response = await fetch(`${base}/sessions/probe/state`);
      if (response.status === 404) {
        return;
      }
    } catch {
      // not listening yet
    }
    await new Promise((resolve) => setTimeout(resolve, 250));
  }
  throw new Error("server did not come up");
}

function runWalk(planPath: string, answers: string[]): Promise<string> {
  return new Promise((resolve, reject) => {
    const child = spawn(
      "python3",
      [
        "-m",
        "voiplan.cli",
        "walk",
        "--program",
        fig2Path,
        "--plan",
        planPath,
        "--no-timing",
      ],
      { cwd: repoRoot },
    );
    let out = "";
    let err = "";
    child.stdout.on("data", (chunk) => (out += chunk));
    child.stderr.on("data", (chunk) => (err += chunk));
    child.on("close", (code) => {
      if (code === 0) {
        resolve(out);
      } else {
        reject(new Error(`walk exited ${code}: ${err}`));
      }
    });
    child.stdin.write(answers.join("\n") + "\n");
    child.stdin.end();
  });
}

function displayedEntropy(state: SessionState): number {
  const html = renderStateHtml({ state, error: null, busy: false });
  const match = html.match(/id="entropy">([0-9.]+)</);
  if (!match || !match[1]) {
    throw new Error("entropy not rendered");
  }
  return Number(match[1]);
}

beforeAll(async () => {
  server = spawn("python3", ["-m", "voiplan.cli", "serve", "--port", String(port)], {
    cwd: repoRoot,
    stdio: "ignore",
  });
  await waitForServer();
});

afterAll(() => {
  server?.kill();
});

describe("scripted session against the live service", () => {
  it("runs a budget-2 session and matches the CLI walk", async () => {
    const api = new SessionApi(base);
    let state = await api.createSession({
      program,
      query: "epidemic",
      budget: 2,
      utility: "entropy",
    });
    expect(state.recommendation).toBe("diagnosis(2)");
    expect(state.budget).toEqual({ initial: 2, remaining: 2, spent: 0 });

    const plan = await api.plan(state.id);
    expect(plan.root.choice).toBe("diagnosis(2)");
    const planPath = join(mkdtempSync(join(tmpdir(), "voiplan-")), "plan.json");
    writeFileSync(planPath, JSON.stringify(plan));

    // follow the exported plan along the all-true branch
    const answers: string[] = [];
    let node = plan.root;
    while (node.choice) {
      answers.push("true");
      state = await api.observe(state.id, {
        observable: node.choice,
        realization: "true",
        idempotency_key: `walk-${answers.length}`,
      });
      node = node.children["true"]!;
    }
    expect(answers).toHaveLength(2);
    expect(state.budget.remaining).toBe(0);
    expect(state.leaf_reason).toBe("insufficient-budget");
    expect(state.history.map((h) => h.realization)).toEqual(["true", "true"]);

    const walkOut = await runWalk(planPath, answers);
    const walkEntropy = Number(/entropy ([0-9.]+)/.exec(walkOut)?.[1]);
    expect(Math.abs(displayedEntropy(state) - walkEntropy)).toBeLessThanOrEqual(1e-6);

    // replaying the last submit with the same idempotency key changes nothing
    const replay = await api.observe(state.id, {
      observable: plan.root.children["true"]!.choice!,
      realization: "true",
      idempotency_key: `walk-${answers.length}`,
    });
    expect(replay).toEqual(state);
    const after = await api.state(state.id);
    expect(after.budget).toEqual(state.budget);
    expect(after.posterior).toBe(state.posterior);

    await api.remove(state.id);
  });

  it("rejects contradictory outcomes without corrupting the session", async () => {
    const api = new SessionApi(base);
    const created = await api.createSession({
      program,
      query: "epidemic",
      budget: 2,
      utility: "entropy",
    });
    await api.observe(created.id, { observable: "diagnosis(2)", realization: "true" });
    await expect(
      api.observe(created.id, { observable: "diagnosis(2)", realization: "false" }),
    ).rejects.toMatchObject({ status: 409 });
    const state = await api.state(created.id);
    expect(state.budget.remaining).toBe(1);
    await api.remove(created.id);
  });
});
