/** Rotatable 3D preview of the current draft, built on three.js.
 *
 * Only this module touches WebGL; the mesh-placement math lives in
 * geometry.ts so it stays testable without a GPU.
 */

import * as THREE from "three";

import { AssemblyDto } from "./api.js";
import { assemblyMeshes, fitBounds } from "./geometry.js";
import { DesignSession } from "./state.js";

const UNIT_COLORS: Record<string, number> = {
  body: 0x607d8b,
  arm: 0x90a4ae,
  motor: 0x37474f,
  propeller: 0xffb74d,
  camera: 0x4fc3f7,
  skid: 0x8d6e63,
  battery: 0x81c784,
  antenna: 0xe57373,
};

export class PreviewViewer {
  private scene = new THREE.Scene();
  private camera: THREE.PerspectiveCamera;
  private renderer: THREE.WebGLRenderer;
  private group = new THREE.Group();
  private angle = 0.6;
  private dragging = false;
  private radius = 400;

  constructor(canvas: HTMLCanvasElement, session: DesignSession) {
    this.renderer = new THREE.WebGLRenderer({ canvas, antialias: true, alpha: true });
    this.camera = new THREE.PerspectiveCamera(50, canvas.width / canvas.height, 1, 5000);
    this.camera.up.set(0, 0, 1);
    this.scene.add(new THREE.AmbientLight(0xffffff, 0.7));
    const key = new THREE.DirectionalLight(0xffffff, 0.8);
    key.position.set(200, 100, 300);
    this.scene.add(key);
    this.scene.add(this.group);

    canvas.addEventListener("pointerdown", () => (this.dragging = true));
    window.addEventListener("pointerup", () => (this.dragging = false));
    canvas.addEventListener("pointermove", (e) => {
      if (this.dragging) {
        this.angle += e.movementX * 0.01;
        this.frame();
      }
    });

    session.subscribe(() => {
      if (session.assembly) this.setAssembly(session.assembly);
    });
    if (session.assembly) this.setAssembly(session.assembly);
  }

  setAssembly(assembly: AssemblyDto): void {
    this.group.clear();
    for (const spec of assemblyMeshes(assembly)) {
      const [ex, ey, ez] = spec.extent;
      let geometry: THREE.BufferGeometry;
      if (spec.unit === "body" || spec.unit === "motor" || spec.unit === "propeller" || spec.unit === "antenna") {
        geometry = new THREE.CylinderGeometry(ex / 2, ex / 2, ez, 24);
        geometry.rotateX(Math.PI / 2); // cylinder axis is z in grammar space
      } else {
        geometry = new THREE.BoxGeometry(ex, ey, ez);
      }
      const material = new THREE.MeshStandardMaterial({
        color: UNIT_COLORS[spec.unit] ?? 0xb0bec5,
      });
      const mesh = new THREE.Mesh(geometry, material);
      const m = spec.rotation;
      const basis = new THREE.Matrix4().set(
        m[0][0], m[0][1], m[0][2], 0,
        m[1][0], m[1][1], m[1][2], 0,
        m[2][0], m[2][1], m[2][2], 0,
        0, 0, 0, 1,
      );
      mesh.setRotationFromMatrix(basis);
      mesh.position.set(spec.center[0], spec.center[1], spec.center[2]);
      this.group.add(mesh);
    }
    const bounds = fitBounds(assembly);
    this.radius = bounds.radius * 2.6;
    this.frame();
  }

  private frame(): void {
    this.camera.position.set(
      Math.cos(this.angle) * this.radius,
      Math.sin(this.angle) * this.radius,
      this.radius * 0.6,
    );
    this.camera.lookAt(0, 0, 0);
    this.renderer.render(this.scene, this.camera);
  }
}
