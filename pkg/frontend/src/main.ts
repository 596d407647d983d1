/** Browser entry point: builds the studio against the service URL given by
 * the ?service= query parameter, defaulting to the page's own origin. */

import { ServiceClient } from "./api.js";
import { StudioApp } from "./app.js";
import { StudioSession } from "./session.js";

export function serviceUrlFrom(location: Location): string {
  const param = new URLSearchParams(location.search).get("service");
  return param ?? location.origin;
}

export function bootstrap(root: HTMLElement): StudioApp {
  const serviceUrl = serviceUrlFrom(window.location);
  const client = new ServiceClient(serviceUrl);
  const session = new StudioSession(serviceUrl, window.localStorage);
  const app = new StudioApp(root, client, session);
  void app.resume();
  return app;
}

if (typeof document !== "undefined") {
  const root = document.getElementById("studio");
  if (root) bootstrap(root);
}
