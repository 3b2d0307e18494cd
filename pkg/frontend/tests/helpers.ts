import { readFileSync, readdirSync } from "node:fs";
import { join } from "node:path";

import { FileMap, loadBundle, Bundle } from "../src/bundle.js";

export const FIXTURES = join(__dirname, "fixtures");

export function fileMapFromDir(dir: string): FileMap {
  const map: FileMap = new Map();
  for (const name of readdirSync(dir)) {
    map.set(name, new Uint8Array(readFileSync(join(dir, name))));
  }
  return map;
}

export async function loadFixtureBundle(): Promise<Bundle> {
  return loadBundle(fileMapFromDir(join(FIXTURES, "bundle")));
}

export function readJson(path: string): any {
  return JSON.parse(readFileSync(path, "utf-8"));
}
