import { createServer, IncomingMessage, Server, ServerResponse } from "node:http";
import { readFileSync } from "node:fs";
import { join } from "node:path";
import { AddressInfo } from "node:net";
import { afterAll, beforeAll, describe, expect, it } from "vitest";

import { ApiClient } from "../src/api.js";
import { ChatController, ChatView } from "../src/controller.js";
import { STAGES } from "../src/types.js";

const TRACE = readFileSync(join(__dirname, "fixtures", "trace-search.json"), "utf-8");

function sse(res: ServerResponse, events: Array<[string, string]>): void {
  res.writeHead(200, { "content-type": "text/event-stream" });
  for (const [event, data] of events) {
    res.write(`event: ${event}\ndata: ${data}\n\n`);
  }
  res.end();
}

/** Stub server replaying a fixture trace over the real wire contract. */
function stubServer(): Server {
  return createServer((req: IncomingMessage, res: ServerResponse) => {
    const url = req.url ?? "";
    if (req.method === "POST" && url === "/sessions") {
      res.writeHead(201, { "content-type": "application/json" });
      res.end(JSON.stringify({ session_id: "s1" }));
    } else if (req.method === "POST" && url === "/sessions/s1/messages/stream") {
      let body = "";
      req.on("data", (chunk) => (body += chunk));
      req.on("end", () => {
        const { utterance } = JSON.parse(body) as { utterance: string };
        if (utterance.includes("explode")) {
          sse(res, [
            ["stage", "query_generation"],
            ["error", JSON.stringify({ stage: "retrieval", message: "index offline" })],
          ]);
        } else {
          sse(res, [
            ...STAGES.map((s): [string, string] => ["stage", s]),
            ["final", "Here's what I found about the lighthouse."],
            ["turn_index", "0"],
          ]);
        }
      });
    } else if (req.method === "GET" && url === "/sessions/s1/trace/0") {
      res.writeHead(200, { "content-type": "application/json" });
      res.end(TRACE);
    } else {
      res.writeHead(404, { "content-type": "application/json" });
      res.end(JSON.stringify({ detail: "not found" }));
    }
  });
}

let server: Server;
let base: string;

beforeAll(async () => {
  server = stubServer();
  await new Promise<void>((resolve) => server.listen(0, "127.0.0.1", resolve));
  const address = server.address() as AddressInfo;
  base = `http://127.0.0.1:${address.port}`;
});

afterAll(async () => {
  await new Promise<void>((resolve) => server.close(() => resolve()));
});

describe("chat view against the stub server", () => {
  it("completes a turn: bubble pair appears and input re-enables", async () => {
    const views: ChatView[] = [];
    const controller = new ChatController(new ApiClient(base), (v) => views.push(v));
    await controller.send("tell me about the harbor lighthouse");

    const final = controller.view();
    expect(final.messagesHtml).toContain("tell me about the harbor lighthouse");
    expect(final.messagesHtml).toContain("Here&#39;s what I found about the lighthouse.".replace("&#39;", "'"));
    expect(final.messagesHtml).toContain('class="bubble user"');
    expect(final.messagesHtml).toContain('class="bubble agent"');
    expect(final.inputDisabled).toBe(false);
    expect(final.errorHtml).toBe("");
    // input was disabled while the turn was in flight
    expect(views.some((v) => v.inputDisabled)).toBe(true);
  });

  it("lights progress steps in pipeline order as stage events arrive", async () => {
    const doneCounts: number[] = [];
    const controller = new ChatController(new ApiClient(base), (v) => {
      doneCounts.push((v.progressHtml.match(/step done/g) ?? []).length);
    });
    await controller.send("lighthouse please");
    const maxDone = Math.max(...doneCounts);
    expect(maxDone).toBe(7);
    // monotone: steps only ever light up while in flight
    const rising = doneCounts.slice(0, doneCounts.indexOf(maxDone) + 1);
    expect([...rising].sort((a, b) => a - b)).toEqual(rising);
  });

  it("shows an inline error banner and re-enables input on a server error event", async () => {
    const controller = new ChatController(new ApiClient(base));
    await controller.send("please explode");
    const view = controller.view();
    expect(view.errorHtml).toContain("error-banner");
    expect(view.errorHtml).toContain("retrieval");
    expect(view.inputDisabled).toBe(false);
    expect(view.messagesHtml).not.toContain("bubble agent");
  });

  it("fetches the trace and renders seven stage panels with verdict badges and the diff", async () => {
    const controller = new ChatController(new ApiClient(base));
    await controller.send("tell me about the harbor lighthouse");
    const html = await controller.traceHtml(0);
    expect(html.match(/<details/g)).toHaveLength(7);
    expect(html).toContain("badge-supports");
    expect(html).toContain("badge-refutes");
    expect(html).toContain("badge-nei");
    expect(html).toContain('class="diff"');
    // trace is cached on the view turn after the first fetch
    expect(controller.getTurn(0)?.trace).not.toBeNull();
  });

  it("ignores sends while a turn is in flight (one active request per session)", async () => {
    const controller = new ChatController(new ApiClient(base));
    const first = controller.send("tell me about the harbor lighthouse");
    expect(controller.busy).toBe(true);
    await controller.send("second message while busy");
    await first;
    const html = controller.view().messagesHtml;
    expect(html).not.toContain("second message while busy");
    expect((html.match(/class="bubble user"/g) ?? []).length).toBe(1);
  });
});
