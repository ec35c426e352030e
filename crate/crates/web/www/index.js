import init, { Game, maze_text, level_names } from "./pkg/mazelab_web.js";

const $ = (id) => document.getElementById(id);
const W = 160, H = 120;

await init();

for (const name of level_names().split("\n")) {
  $("level").append(new Option(name, name));
}

const held = new Set();
const rgbCtx = $("rgb").getContext("2d");
const depthCtx = $("depth").getContext("2d");
let game = null;

$("rgb").addEventListener("keydown", (e) => { held.add(e.key.toLowerCase()); e.preventDefault(); });
$("rgb").addEventListener("keyup", (e) => held.delete(e.key.toLowerCase()));
$("rgb").addEventListener("blur", () => held.clear());

function axis(pos, neg) {
  return (held.has(pos) ? 1 : 0) - (held.has(neg) ? 1 : 0);
}

function draw() {
  rgbCtx.putImageData(new ImageData(new Uint8ClampedArray(game.pixels()), W, H), 0, 0);
  depthCtx.putImageData(new ImageData(new Uint8ClampedArray(game.depth()), W, H), 0, 0);
  $("status").textContent = `tick ${game.tick()}  score ${game.score()}` + (game.running() ? "" : "  (episode over)");
}

function start() {
  try {
    game?.free();
    game = new Game($("level").value, W, H, Number($("seed").value) >>> 0);
    draw();
    $("rgb").focus();
  } catch (err) {
    $("status").textContent = String(err);
  }
}

// One tick per animation frame; the environment runs at 60 ticks a second.
function loop() {
  if (game && game.running()) {
    game.step(
      40 * axis("arrowright", "arrowleft"),
      20 * axis("arrowup", "arrowdown"),
      axis("d", "a"),
      axis("w", "s"),
      held.has("f"),
      held.has(" "),
      1,
    );
    draw();
  }
  requestAnimationFrame(loop);
}

function generate() {
  try {
    $("maze").textContent = maze_text(Number($("mw").value), Number($("mh").value), Number($("ms").value) >>> 0, $("mrand").checked);
  } catch (err) {
    $("maze").textContent = String(err);
  }
}

$("start").addEventListener("click", start);
$("gen").addEventListener("click", generate);
start();
generate();
requestAnimationFrame(loop);
