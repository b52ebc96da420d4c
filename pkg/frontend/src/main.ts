/**
 * Terminal demo of the interaction loop. Connects to a running
 * `deform serve` endpoint, loads a rig, grabs the cage vertex nearest to
 * a screen point, drags it across a few throttled ticks, and reports the
 * acknowledged frames. Doubles as executable documentation of the
 * client API; pass --help for flags.
 */

import { EngineClient } from "./client.js";
import { isError } from "./protocol.js";
import { renderFrame } from "./render.js";
import {
  DragThrottle,
  defaultViewState,
  dragToDelta,
  pick,
  project,
  select,
} from "./view.js";

export const KEY_HELP = `keys (forwarded by the host shell when embedded):
  1..4   tool: select / rotate joint / drag rest cage / drag current cage
  s c k  toggle skin / cage / skeleton visibility (current pose)
  S C K  same for the rest-pose overlays
  f      toggle handle fading near the cursor
  g      request a snapshot on the server
  q      quit`;

function arg(name: string, fallback: string): string {
  const i = process.argv.indexOf(`--${name}`);
  return i >= 0 && i + 1 < process.argv.length ? process.argv[i + 1] : fallback;
}

async function main(): Promise<void> {
  if (process.argv.includes("--help")) {
    console.log("usage: node dist/main.js [--host H] [--port P] [--rig SPEC]");
    console.log(KEY_HELP);
    return;
  }
  const host = arg("host", "127.0.0.1");
  const port = Number(arg("port", "7643"));
  const rig = arg("rig", "builtin:arm");

  const client = new EngineClient();
  await client.connect(host, port);
  await client.hello();
  const first = await client.load(rig);
  console.log(
    `loaded ${rig}: ${first.counts.skin} skin vertices, ` +
      `${first.counts.cage} cage vertices, ${first.counts.joints} joints`,
  );

  const state = defaultViewState();
  state.tool = "DRAG_CAGE_CURR";

  // grab whatever cage handle projects closest to mid-screen
  let clickAt = { x: state.camera.viewport.width / 2, y: state.camera.viewport.height / 2 };
  let grabbed = pick(clickAt, state, first);
  if (grabbed === null) {
    const proj = project(state.camera, [
      first.cageCurr[0],
      first.cageCurr[1],
      first.cageCurr[2],
    ]);
    if (proj === null) throw new Error("cage vertex 0 is behind the camera");
    clickAt = { x: proj.x, y: proj.y };
    grabbed = pick(clickAt, state, first);
  }
  if (grabbed === null) throw new Error("no handle within pick radius");
  select(state, grabbed, first);
  console.log(`grabbed ${grabbed.kind} handle ${grabbed.index}`);

  const throttle = new DragThrottle();
  let latest = first;
  let ticks = 0;
  for (let step = 0; step < 12; step++) {
    if (!throttle.allow()) {
      await new Promise((r) => setTimeout(r, 4));
      step--;
      continue;
    }
    const payloads = dragToDelta(state, grabbed, { dx: 6, dy: -2 }, latest);
    for (const payload of payloads) {
      const reply = await client.tryEdit(payload);
      if (isError(reply)) {
        console.log(`edit rejected (${reply.code}): reverting to frame ${latest.frame}`);
        break;
      }
      latest = reply;
      ticks++;
    }
  }
  console.log(`acknowledged ${ticks} edits, final frame ${latest.frame}`);

  const commands = renderFrame(state, latest, first.topology);
  console.log(`draw list: ${commands.map((c) => `${c.structure}/${c.pose} ${c.kind}`).join(", ")}`);

  const snap = await client.snapshot("demo");
  if (snap.files !== undefined) {
    for (const [kind, path] of Object.entries(snap.files)) console.log(`wrote ${kind}: ${path}`);
  }
  await client.close();
  console.log(KEY_HELP);
}

const entry = process.argv[1] ?? "";
if (entry.endsWith("main.js") || entry.endsWith("main.ts")) {
  main().catch((err) => {
    console.error(`error: ${err instanceof Error ? err.message : String(err)}`);
    process.exitCode = 1;
  });
}
