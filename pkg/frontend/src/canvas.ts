// Display-list painter.  World coordinates are road-frame meters with +x
// to the right; the viewport fits the scene bounding box plus margin.

import { Primitive } from "./render";

export interface Viewport {
  scale: number;       // px per meter
  ox: number;          // world x at left edge
  oy: number;          // world y at TOP edge (y grows downward on screen)
  height: number;
}

export function fitViewport(points: [number, number][], widthPx: number,
                            heightPx: number, marginM = 8): Viewport {
  let minX = Infinity, maxX = -Infinity, minY = Infinity, maxY = -Infinity;
  for (const [x, y] of points) {
    minX = Math.min(minX, x); maxX = Math.max(maxX, x);
    minY = Math.min(minY, y); maxY = Math.max(maxY, y);
  }
  if (!isFinite(minX)) { minX = 0; maxX = 100; minY = 0; maxY = 12; }
  minX -= marginM; maxX += marginM; minY -= marginM; maxY += marginM;
  const scale = Math.min(widthPx / (maxX - minX), heightPx / (maxY - minY));
  return { scale, ox: minX, oy: maxY, height: heightPx };
}

export function toScreen(vp: Viewport, x: number, y: number): [number, number] {
  return [(x - vp.ox) * vp.scale, (vp.oy - y) * vp.scale];
}

export function toWorld(vp: Viewport, px: number, py: number): [number, number] {
  return [px / vp.scale + vp.ox, vp.oy - py / vp.scale];
}

export function paint(ctx: CanvasRenderingContext2D, vp: Viewport,
                      primitives: Primitive[]): void {
  ctx.clearRect(0, 0, ctx.canvas.width, ctx.canvas.height);
  for (const p of primitives) {
    switch (p.kind) {
      case "polyline": {
        ctx.strokeStyle = p.color;
        ctx.lineWidth = p.width;
        ctx.setLineDash(p.dash ?? []);
        ctx.beginPath();
        p.points.forEach(([x, y], i) => {
          const [sx, sy] = toScreen(vp, x, y);
          if (i === 0) ctx.moveTo(sx, sy); else ctx.lineTo(sx, sy);
        });
        ctx.stroke();
        ctx.setLineDash([]);
        break;
      }
      case "dot": {
        const [sx, sy] = toScreen(vp, p.x, p.y);
        ctx.globalAlpha = p.alpha;
        ctx.fillStyle = p.color;
        ctx.beginPath();
        ctx.arc(sx, sy, Math.max(1.5, p.r * vp.scale * 0.4), 0, 2 * Math.PI);
        ctx.fill();
        ctx.globalAlpha = 1;
        break;
      }
      case "ellipse": {
        const [sx, sy] = toScreen(vp, p.x, p.y);
        ctx.fillStyle = p.color;
        ctx.beginPath();
        ctx.ellipse(sx, sy, Math.max(1, p.rx * vp.scale), Math.max(1, p.ry * vp.scale),
                    -p.angle, 0, 2 * Math.PI);
        ctx.fill();
        break;
      }
      case "cross": {
        const [sx, sy] = toScreen(vp, p.x, p.y);
        const s = p.size * vp.scale;
        ctx.strokeStyle = p.color;
        ctx.lineWidth = 2.5;
        ctx.beginPath();
        ctx.moveTo(sx - s, sy - s); ctx.lineTo(sx + s, sy + s);
        ctx.moveTo(sx - s, sy + s); ctx.lineTo(sx + s, sy - s);
        ctx.stroke();
        break;
      }
      case "knot": {
        const [sx, sy] = toScreen(vp, p.x, p.y);
        ctx.strokeStyle = p.color;
        ctx.fillStyle = "#ffffff";
        ctx.lineWidth = 2;
        ctx.beginPath();
        ctx.arc(sx, sy, Math.max(4, p.r * vp.scale * 0.5), 0, 2 * Math.PI);
        ctx.fill();
        ctx.stroke();
        break;
      }
    }
  }
}
