/**
 * Socket bridge: exposes the runtime's TCP protocol socket to the
 * browser over HTTP. Serves the static playground, streams inbound
 * protocol lines as server-sent events (with full replay for late
 * joiners, so reconnecting resumes from the current state), and relays
 * POSTed lines back to the socket.
 *
 *   node dist/bridge.js --server 127.0.0.1:7471 --port 8080 [--map FILE]
 */

import * as http from "node:http";
import * as net from "node:net";
import * as fs from "node:fs";
import * as path from "node:path";
import { parseArgs } from "node:util";
import { fileURLToPath } from "node:url";

const { values: opts } = parseArgs({
  options: {
    server: { type: "string", default: "127.0.0.1:7471" },
    port: { type: "string", default: "8080" },
    map: { type: "string", default: "" },
  },
});

const here = path.dirname(fileURLToPath(import.meta.url));
const root = path.resolve(here, "..");
const [serverHost, serverPort] = (opts.server as string).split(":");

const history: string[] = [];
const clients = new Set<http.ServerResponse>();
let upstream: net.Socket | null = null;
let upstreamOk = false;

function push(line: string): void {
  history.push(line);
  for (const res of clients) res.write(`data: ${line}\n\n`);
}

function status(state: string): void {
  for (const res of clients) res.write(`event: bridge\ndata: ${state}\n\n`);
}

function connectUpstream(): void {
  const sock = net.createConnection(
    { host: serverHost, port: Number(serverPort) });
  let buf = "";
  sock.on("connect", () => {
    upstreamOk = true;
    status("connected");
    console.log(`bridge: connected to ${opts.server}`);
  });
  sock.on("data", (chunk) => {
    buf += chunk.toString("utf8");
    let nl;
    while ((nl = buf.indexOf("\n")) >= 0) {
      const line = buf.slice(0, nl);
      buf = buf.slice(nl + 1);
      if (line.trim()) push(line);
    }
  });
  const retry = () => {
    if (upstreamOk || upstream === sock) {
      upstreamOk = false;
      upstream = null;
      status("disconnected");
      setTimeout(connectUpstream, 1000);
    }
  };
  sock.on("error", retry);
  sock.on("close", retry);
  upstream = sock;
}

const MIME: Record<string, string> = {
  ".html": "text/html", ".js": "text/javascript", ".css": "text/css",
};

function serveFile(res: http.ServerResponse, file: string): void {
  const full = path.join(root, file);
  if (!full.startsWith(root) || !fs.existsSync(full)) {
    res.writeHead(404).end("not found");
    return;
  }
  res.writeHead(200, {
    "Content-Type": MIME[path.extname(full)] ?? "application/octet-stream",
  });
  res.end(fs.readFileSync(full));
}

const server = http.createServer((req, res) => {
  const url = (req.url ?? "/").split("?")[0];
  if (req.method === "GET" && (url === "/" || url === "/index.html")) {
    serveFile(res, "index.html");
  } else if (req.method === "GET" && url.startsWith("/dist/")) {
    serveFile(res, url.slice(1));
  } else if (req.method === "GET" && url === "/map") {
    res.writeHead(200, { "Content-Type": "text/plain" });
    res.end(opts.map ? fs.readFileSync(opts.map as string) : "");
  } else if (req.method === "GET" && url === "/stream") {
    res.writeHead(200, {
      "Content-Type": "text/event-stream",
      "Cache-Control": "no-cache",
      Connection: "keep-alive",
    });
    for (const line of history) res.write(`data: ${line}\n\n`);
    res.write(`event: bridge\ndata: ${upstreamOk ? "connected" : "disconnected"}\n\n`);
    clients.add(res);
    req.on("close", () => clients.delete(res));
  } else if (req.method === "POST" && url === "/send") {
    let body = "";
    req.on("data", (c) => (body += c));
    req.on("end", () => {
      if (upstream && upstreamOk) {
        upstream.write(body.endsWith("\n") ? body : body + "\n");
        res.writeHead(204).end();
      } else {
        res.writeHead(503).end("upstream down");
      }
    });
  } else {
    res.writeHead(404).end("not found");
  }
});

connectUpstream();
server.listen(Number(opts.port), () => {
  console.log(`playground at http://127.0.0.1:${opts.port}/`);
});
