#!/usr/bin/env node
/**
 * Adapter entry point.
 *
 *   hisal-adapter --stdio          serve one session over stdin/stdout
 *   hisal-adapter --listen PORT    serve TCP sessions on 127.0.0.1:PORT
 *
 * Sessions end silently on malformed input; diagnostics go to stderr so
 * stdout stays a clean frame stream.
 */

import net from 'node:net';

import { serveSession } from './session';

function usage(): never {
  process.stderr.write('usage: hisal-adapter --stdio | --listen PORT\n');
  process.exit(2);
}

function runStdio(): void {
  serveSession(process.stdin, process.stdout)
    .then(() => process.exit(0))
    .catch((err) => {
      process.stderr.write(`adapter error: ${err}\n`);
      process.exit(1);
    });
}

function runListen(port: number): void {
  const server = net.createServer((socket) => {
    socket.on('error', () => socket.destroy());
    serveSession(socket, socket)
      .catch((err) => {
        process.stderr.write(`session error: ${err}\n`);
      })
      .finally(() => socket.destroy());
  });
  server.on('error', (err) => {
    process.stderr.write(`listen error: ${err}\n`);
    process.exit(1);
  });
  server.listen(port, '127.0.0.1', () => {
    const bound = (server.address() as net.AddressInfo).port;
    process.stderr.write(`listening on 127.0.0.1:${bound}\n`);
  });
}

function main(argv: string[]): void {
  if (argv.length === 1 && argv[0] === '--stdio') {
    runStdio();
    return;
  }
  if (argv.length === 2 && argv[0] === '--listen') {
    const port = Number(argv[1]);
    if (!Number.isInteger(port) || port < 0 || port > 65535) usage();
    runListen(port);
    return;
  }
  usage();
}

main(process.argv.slice(2));
