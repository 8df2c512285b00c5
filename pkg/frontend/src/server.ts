/**
 * Deterministic next-token-distribution server.
 *
 *   node server.js --stdio        serve over stdin/stdout (default)
 *   node server.js --port 9473    serve over TCP, one JSON object per line
 *   node server.js --info         print model info and exit
 *
 * Requests on a connection are answered strictly in order.
 */

import { createInterface } from "node:readline";
import { createServer } from "node:net";
import { TrigramModel } from "./model.js";
import { describe, handleRequest } from "./protocol.js";

const model = new TrigramModel();

function serveStdio(): void {
  const rl = createInterface({ input: process.stdin, terminal: false });
  rl.on("line", (line) => {
    if (!line.trim()) return;
    process.stdout.write(JSON.stringify(handleRequest(model, line)) + "\n");
  });
}

function serveTcp(port: number): void {
  const server = createServer((socket) => {
    const rl = createInterface({ input: socket, terminal: false });
    rl.on("line", (line) => {
      if (!line.trim()) return;
      socket.write(JSON.stringify(handleRequest(model, line)) + "\n");
    });
    socket.on("error", () => socket.destroy());
  });
  server.listen(port, "127.0.0.1", () => {
    process.stdout.write(JSON.stringify({ listening: port, ...describe(model) }) + "\n");
  });
}

const args = process.argv.slice(2);
if (args.includes("--info")) {
  process.stdout.write(JSON.stringify(describe(model)) + "\n");
} else if (args.includes("--port")) {
  const port = Number(args[args.indexOf("--port") + 1]);
  if (!Number.isInteger(port) || port <= 0 || port > 65535) {
    process.stderr.write("usage: server --port <1..65535>\n");
    process.exit(2);
  }
  serveTcp(port);
} else {
  serveStdio();
}
